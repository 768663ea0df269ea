//! Interaction potentials and the local update rules: the nonlinear
//! coalition term over strict-neighbour subsets, the stochastic logistic
//! rule, its deterministic threshold counterpart, and the closed-form
//! symmetry conditions on the reduced potentials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeWeights, Neighbour, NetworkTopology};

/// Tolerance under which the symmetry residual and the subsetwise coalition
/// condition are considered to hold.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// How configurations evolve: all nodes at once, or one uniformly chosen
/// node per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    Synchronous,
    AsynchronousUniform,
}

impl std::fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateMode::Synchronous => write!(f, "synchronous"),
            UpdateMode::AsynchronousUniform => write!(f, "asynchronous-uniform"),
        }
    }
}

/// Interaction weights `w0..w4` (coalitions of 1..5 members), a temperature
/// and the nonlinearity order `k`: coalition weights of more than `k`
/// members are treated as zero. Reduced potentials are `u_m = w_m / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialSet {
    temperature: f64,
    order: u8,
    w: [f64; 5],
}

const POTENTIAL_NAMES: [&str; 5] = ["w0", "w1", "w2", "w3", "w4"];

impl PotentialSet {
    /// `w = [w0, w1, w2, w3, w4]`: singleton, couple, and the three
    /// higher-coalition weights engaged by neighbour pairs, triples and
    /// quadruples respectively.
    pub fn new(temperature: f64, order: u8, w: [f64; 5]) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidTemperature(temperature));
        }
        if !(2..=5).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        for (i, v) in w.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinitePotential {
                    name: POTENTIAL_NAMES[i],
                    value: *v,
                });
            }
        }
        Ok(PotentialSet {
            temperature,
            order,
            w,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Raw weight of coalitions with `m + 1` members (index convention:
    /// `w(0)` is the singleton weight, `w(1)` the couple weight, ...).
    pub fn w(&self, m: usize) -> f64 {
        self.w[m]
    }

    /// Reduced potential `u_m = w_m / T`, zeroed when the coalition size
    /// `m + 1` exceeds the order `k`.
    pub fn u(&self, m: usize) -> f64 {
        if m >= 2 && m + 1 > self.order as usize {
            0.0
        } else {
            self.w[m] / self.temperature
        }
    }

    /// Same set with the singleton weight replaced.
    pub fn with_w0(&self, w0: f64) -> Self {
        let mut w = self.w;
        w[0] = w0;
        PotentialSet {
            temperature: self.temperature,
            order: self.order,
            w,
        }
    }

    /// Same set at a different temperature.
    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        PotentialSet::new(temperature, self.order, self.w)
    }

    /// Attractive regime: negative singleton weight, positive couple weight.
    pub fn is_attractive(&self) -> bool {
        self.w[0] < 0.0 && self.w[1] > 0.0
    }

    /// Coalition term for `m` active strict neighbours, in reduced (u)
    /// units. Isotropy lets the subset sum collapse to binomial counts.
    pub fn phi_of_count(&self, m: u32) -> f64 {
        let mut phi = 0.0;
        for s in 2..=(self.order as u32 - 1).min(4) {
            phi += binomial(m, s) * self.u(s as usize);
        }
        phi
    }

    /// Coalition term in raw (w) units.
    pub fn phi_w_of_count(&self, m: u32) -> f64 {
        let mut phi = 0.0;
        for s in 2..=(self.order as u32 - 1).min(4) {
            phi += binomial(m, s) * self.w[s as usize];
        }
        phi
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Subset of the four strict neighbours of a node, one bit per neighbour
/// in lexical slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NeighbourMask(pub u8);

impl NeighbourMask {
    pub const EMPTY: NeighbourMask = NeighbourMask(0);
    pub const FULL: NeighbourMask = NeighbourMask(0b1111);

    pub fn count(self) -> u32 {
        (self.0 & 0xF).count_ones()
    }

    pub fn contains(self, slot: usize) -> bool {
        self.0 & (1 << slot) != 0
    }

    pub fn complement(self) -> NeighbourMask {
        NeighbourMask(!self.0 & 0xF)
    }

    pub fn all() -> impl Iterator<Item = NeighbourMask> {
        (0u8..16).map(NeighbourMask)
    }
}

/// Nonlinear coalition term of the active strict-neighbour set `k_set`.
pub fn coalition_term(k_set: NeighbourMask, p: &PotentialSet) -> f64 {
    p.phi_of_count(k_set.count())
}

/// States of the free nodes plus the clamped boundary value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub states: Vec<u8>,
    pub boundary: u8,
}

impl Configuration {
    pub fn uniform(n: usize, state: u8, boundary: u8) -> Self {
        Configuration {
            states: vec![state; n],
            boundary,
        }
    }

    /// Unpacks a state-space index: bit `i` holds the state of the `i`-th
    /// free node in lexical order.
    pub fn from_bits(bits: u32, n: usize, boundary: u8) -> Self {
        Configuration {
            states: (0..n).map(|i| ((bits >> i) & 1) as u8).collect(),
            boundary,
        }
    }

    pub fn bits(&self) -> u32 {
        self.states
            .iter()
            .enumerate()
            .fold(0, |acc, (i, s)| acc | ((*s as u32) << i))
    }
}

/// Number of active strict neighbours of a free node, counting clamped
/// boundary neighbours at the boundary value.
pub fn active_neighbour_count(
    topology: &NetworkTopology,
    free_index: usize,
    x: &Configuration,
) -> u32 {
    topology.neighbours(free_index).iter().fold(0, |acc, nb| {
        acc + match nb {
            Neighbour::Free(j) => x.states[*j] as u32,
            Neighbour::Boundary(_) => x.boundary as u32,
        }
    })
}

/// Exponent of the stochastic rule at node `i`:
/// `u0 + u1 * (active strict neighbours) + phi(active set)`.
pub fn local_exponent(
    topology: &NetworkTopology,
    free_index: usize,
    x: &Configuration,
    p: &PotentialSet,
) -> f64 {
    let m = active_neighbour_count(topology, free_index, x);
    p.u(0) + p.u(1) * m as f64 + p.phi_of_count(m)
}

/// Logistic probability `e^E / (1 + e^E)` that a node becomes active,
/// evaluated without overflow on either side. The negative branch uses the
/// algebraically identical complement `1 - 1/(1 + e^E)`: the subtraction is
/// exact there, so `activation_probability(E) + activation_probability(-E)`
/// is exactly 1 in floating point.
pub fn activation_probability(exponent: f64) -> f64 {
    if exponent >= 0.0 {
        1.0 / (1.0 + (-exponent).exp())
    } else {
        1.0 - 1.0 / (1.0 + exponent.exp())
    }
}

/// Activation probability indexed by the number of active strict
/// neighbours. Isotropy makes the local rule depend on the neighbourhood
/// only through that count, so one five-entry table covers every node.
pub fn activation_table(p: &PotentialSet) -> [f64; 5] {
    let mut table = [0.0; 5];
    for (m, slot) in table.iter_mut().enumerate() {
        let e = p.u(0) + p.u(1) * m as f64 + p.phi_of_count(m as u32);
        *slot = activation_probability(e);
    }
    table
}

/// Synchronous deterministic threshold update: each node becomes active
/// exactly when its incoming potential strictly exceeds its threshold
/// (ties deactivate). The potential sums the self arc and all four couple
/// arcs, with boundary neighbours clamped at the boundary value.
pub fn deterministic_update(
    x: &Configuration,
    topology: &NetworkTopology,
    weights: &LatticeWeights,
    thresholds: &[f64],
) -> Configuration {
    assert_eq!(x.states.len(), topology.free_count());
    assert_eq!(thresholds.len(), topology.free_count());
    let mut next = Vec::with_capacity(x.states.len());
    for i in 0..topology.free_count() {
        let mut v = weights.self_weight(i) * x.states[i] as f64;
        for (s, nb) in topology.neighbours(i).iter().enumerate() {
            let state = match nb {
                Neighbour::Free(j) => x.states[*j],
                Neighbour::Boundary(_) => x.boundary,
            };
            v += weights.couple_weight(i, s) * state as f64;
        }
        next.push(if v - thresholds[i] > 0.0 { 1 } else { 0 });
    }
    Configuration {
        states: next,
        boundary: x.boundary,
    }
}

/// Residual of the symmetry condition in reduced units:
/// `u0 + (4 u1)/2 + phi(full neighbourhood)/2`. Zero residual (together
/// with a subsetwise-symmetric coalition term) makes the local rule
/// invariant under global state inversion.
pub fn symmetry_residual(p: &PotentialSet) -> f64 {
    p.u(0) + 2.0 * p.u(1) + p.phi_of_count(4) / 2.0
}

/// Singleton weight that zeroes the symmetry residual for the given couple
/// and coalition weights: `w0 = -2 w1 - phi_w(full neighbourhood)/2`.
pub fn solve_symmetric_w0(p: &PotentialSet) -> f64 {
    -2.0 * p.w(1) - p.phi_w_of_count(4) / 2.0
}

/// Checks the subsetwise coalition symmetry
/// `phi(K) + phi(full \ K) = phi(full)` over all 16 neighbour subsets.
/// Returns the verdict and the maximal deviation.
pub fn phi_symmetry_check(p: &PotentialSet) -> (bool, f64) {
    let full = coalition_term(NeighbourMask::FULL, p);
    let mut max_dev: f64 = 0.0;
    for k_set in NeighbourMask::all() {
        let dev = (coalition_term(k_set, p) + coalition_term(k_set.complement(), p) - full).abs();
        max_dev = max_dev.max(dev);
    }
    (max_dev < SYMMETRY_TOL, max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pot(t: f64, k: u8, w: [f64; 5]) -> PotentialSet {
        PotentialSet::new(t, k, w).unwrap()
    }

    /// Literal subset enumeration of the coalition term, independent of the
    /// binomial shortcut used in production.
    fn oracle_phi(k_mask: u8, p: &PotentialSet) -> f64 {
        let mut phi = 0.0;
        for s in 0u8..16 {
            if s & !k_mask != 0 {
                continue; // not a subset of the active set
            }
            let size = s.count_ones() as usize;
            if size >= 2 && size <= p.order() as usize - 1 {
                phi += p.w(size) / p.temperature();
            }
        }
        phi
    }

    #[test]
    fn coalition_term_matches_subset_enumeration_oracle() {
        let cases = [
            pot(1.0, 5, [-3.0, 1.0, 1.0, -1.0, 0.0]),
            pot(2.0, 4, [0.3, -0.7, 0.9, 2.0, 5.0]),
            pot(0.5, 3, [1.0, 1.0, -2.0, 3.0, 4.0]),
            pot(1.7, 2, [1.0, 2.0, 3.0, 4.0, 5.0]),
        ];
        for p in &cases {
            for k_set in NeighbourMask::all() {
                assert_abs_diff_eq!(
                    coalition_term(k_set, p),
                    oracle_phi(k_set.0, p),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn coalition_term_frozen_values() {
        let p = pot(1.0, 5, [-3.0, 1.0, 1.0, -1.0, 0.0]);
        // 3 active neighbours: C(3,2)*1 + C(3,3)*(-1) = 2
        assert_eq!(p.phi_of_count(3), 2.0);
        // 4 active: C(4,2)*1 + C(4,3)*(-1) = 2
        assert_eq!(p.phi_of_count(4), 2.0);
        // order 2 switches every coalition weight off
        let lin = pot(1.0, 2, [-3.0, 1.0, 7.0, 8.0, 9.0]);
        for m in 0..=4 {
            assert_eq!(lin.phi_of_count(m), 0.0);
        }
        // order 3 keeps only neighbour pairs
        let k3 = pot(1.0, 3, [0.0, 0.0, 1.0, 100.0, 100.0]);
        assert_eq!(k3.phi_of_count(4), 6.0);
    }

    #[test]
    fn reduced_potentials_divide_by_temperature() {
        let p = pot(2.0, 5, [-3.0, 1.0, 1.0, -1.0, 0.5]);
        assert_eq!(p.u(0), -1.5);
        assert_eq!(p.u(1), 0.5);
        assert_eq!(p.u(4), 0.25);
        let truncated = pot(2.0, 3, [-3.0, 1.0, 1.0, -1.0, 0.5]);
        assert_eq!(truncated.u(2), 0.5);
        assert_eq!(truncated.u(3), 0.0, "above order");
        assert_eq!(truncated.u(4), 0.0, "above order");
    }

    #[test]
    fn potential_set_rejects_bad_parameters() {
        assert!(matches!(
            PotentialSet::new(0.0, 5, [0.0; 5]),
            Err(Error::InvalidTemperature(_))
        ));
        assert!(matches!(
            PotentialSet::new(-1.0, 5, [0.0; 5]),
            Err(Error::InvalidTemperature(_))
        ));
        assert!(matches!(
            PotentialSet::new(1.0, 6, [0.0; 5]),
            Err(Error::InvalidOrder(6))
        ));
        assert!(matches!(
            PotentialSet::new(1.0, 1, [0.0; 5]),
            Err(Error::InvalidOrder(1))
        ));
        assert!(matches!(
            PotentialSet::new(1.0, 5, [f64::NAN, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::NonFinitePotential { name: "w0", .. })
        ));
    }

    #[test]
    fn local_exponent_with_full_neighbourhood() {
        let t = build_lattice(3, 3).unwrap();
        let p = pot(1.0, 5, [-3.0, 1.0, 1.0, -1.0, 0.0]);
        let x = Configuration::uniform(9, 1, 0);
        // centre node: all four strict neighbours active: -3 + 4 + 2 = 3
        assert_eq!(local_exponent(&t, t.central_index(), &x, &p), 3.0);
    }

    #[test]
    fn local_exponent_scales_with_temperature() {
        let t = build_lattice(3, 3).unwrap();
        let w = [-3.0, 1.0, 1.0, -1.0, 0.0];
        let p1 = pot(1.0, 5, w);
        let p2 = pot(2.0, 5, w);
        for bits in 0..512u32 {
            let x = Configuration::from_bits(bits, 9, 0);
            for i in 0..9 {
                let e1 = local_exponent(&t, i, &x, &p1);
                let e2 = local_exponent(&t, i, &x, &p2);
                assert_abs_diff_eq!(e2, e1 / 2.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn logistic_is_half_at_zero_and_saturates() {
        assert_eq!(activation_probability(0.0), 0.5);
        assert_eq!(activation_probability(800.0), 1.0);
        assert_eq!(activation_probability(-800.0), 0.0);
        assert!(activation_probability(3.0) > 0.95);
        assert!(activation_probability(-3.0) < 0.05);
    }

    #[test]
    fn logistic_matches_naive_formula_in_safe_range() {
        for e in [-20.0, -3.0, -0.1, 0.0, 0.7, 3.0, 20.0] {
            let naive = (e as f64).exp() / (1.0 + (e as f64).exp());
            assert_abs_diff_eq!(activation_probability(e), naive, epsilon = 1e-15);
        }
    }

    #[test]
    fn logistic_complement_pair_sums_to_one_exactly_at_three() {
        // The 1x1 boundary-influence closed form relies on this pair.
        let sum = activation_probability(3.0) + activation_probability(-3.0);
        assert_eq!(sum, 1.0);
    }

    proptest! {
        #[test]
        fn logistic_symmetry(e in -700.0f64..700.0) {
            let s = activation_probability(e) + activation_probability(-e);
            prop_assert!((s - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn logistic_is_monotone(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(activation_probability(lo) <= activation_probability(hi));
        }

        #[test]
        fn coalition_is_monotone_under_inclusion_for_nonnegative_weights(
            u2 in 0.0f64..3.0,
            u3 in 0.0f64..3.0,
            u4 in 0.0f64..3.0,
            mask in 0u8..16,
            extra in 0u8..16,
        ) {
            let p = pot(1.0, 5, [0.0, 0.0, u2, u3, u4]);
            let small = NeighbourMask(mask);
            let large = NeighbourMask(mask | extra);
            prop_assert!(coalition_term(small, &p) <= coalition_term(large, &p) + 1e-12);
        }
    }

    #[test]
    fn deterministic_update_examples() {
        // all-zero configuration with positive thresholds stays zero
        let t = build_lattice(2, 2).unwrap();
        let w = LatticeWeights::isotropic(&t, -3.0, 1.0);
        let x = Configuration::uniform(4, 0, 0);
        let next = deterministic_update(&x, &t, &w, &[0.5; 4]);
        assert_eq!(next.states, vec![0, 0, 0, 0]);

        // zero incoming potential with zero threshold deactivates (tie)
        let t1 = build_lattice(1, 1).unwrap();
        let w1 = LatticeWeights::isotropic(&t1, 0.0, 1.0);
        let x1 = Configuration::uniform(1, 1, 0);
        let next1 = deterministic_update(&x1, &t1, &w1, &[0.0]);
        assert_eq!(next1.states, vec![0], "H(0) = 0");

        // fully active clamped boundary dominates: potential 4 > 0
        let x2 = Configuration::uniform(1, 0, 1);
        let next2 = deterministic_update(&x2, &t1, &w1, &[0.0]);
        assert_eq!(next2.states, vec![1]);
    }

    #[test]
    fn deterministic_update_includes_self_arc() {
        let t = build_lattice(1, 1).unwrap();
        let w = LatticeWeights::isotropic(&t, -5.0, 1.0);
        // active node, active boundary: 4*1 - 5 = -1 <= 0 -> deactivates
        let x = Configuration::uniform(1, 1, 1);
        assert_eq!(deterministic_update(&x, &t, &w, &[0.0]).states, vec![0]);
        // inactive node, self arc does not fire: 4 > 0 -> activates
        let y = Configuration::uniform(1, 0, 1);
        assert_eq!(deterministic_update(&y, &t, &w, &[0.0]).states, vec![1]);
    }

    #[test]
    fn symmetry_residual_frozen_values() {
        // u0 + 2 u1 + phi(4)/2 = -3 + 2 + 1 = 0
        let sym = pot(1.0, 5, [-3.0, 1.0, 1.0, -1.0, 0.0]);
        assert_eq!(symmetry_residual(&sym), 0.0);
        // linear case: -1 + 2 = 1
        let lin = pot(1.0, 2, [-1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(symmetry_residual(&lin), 1.0);
    }

    #[test]
    fn solve_symmetric_w0_frozen_values() {
        let p = pot(1.0, 5, [0.0, 1.0, 1.0, -1.0, 0.0]);
        assert_eq!(solve_symmetric_w0(&p), -3.0);
        let lin = pot(1.0, 2, [0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(solve_symmetric_w0(&lin), -2.0);
    }

    #[test]
    fn residual_in_reduced_units_scales_as_inverse_temperature() {
        let w = [-2.4, 1.3, 0.8, -0.5, 0.2];
        for t in [0.25, 0.5, 1.0, 2.0, 5.0] {
            let p = pot(t, 5, w);
            let w_residual = p.w(0) + 2.0 * p.w(1) + p.phi_w_of_count(4) / 2.0;
            assert_abs_diff_eq!(
                symmetry_residual(&p),
                w_residual / t,
                epsilon = 1e-12 * (1.0 + w_residual.abs() / t)
            );
        }
    }

    #[test]
    fn solved_w0_zeroes_the_residual() {
        let base = pot(1.7, 5, [0.0, 0.9, 0.6, -0.6, 0.0]);
        let solved = base.with_w0(solve_symmetric_w0(&base));
        assert_abs_diff_eq!(symmetry_residual(&solved), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn phi_symmetry_holds_iff_u3_cancels_u2_and_u4_vanishes() {
        let (ok, dev) = phi_symmetry_check(&pot(1.0, 5, [0.0, 0.0, 1.0, -1.0, 0.0]));
        assert!(ok);
        assert!(dev < 1e-15);

        let (ok, dev) = phi_symmetry_check(&pot(1.0, 5, [0.0, 0.0, 1.0, 1.0, 0.0]));
        assert!(!ok);
        assert!(dev > 1.0);

        let (ok, _) = phi_symmetry_check(&pot(1.0, 5, [0.0, 0.0, 1.0, -1.0, 0.5]));
        assert!(!ok);

        // order 2: coalition term identically zero, trivially symmetric
        let (ok, dev) = phi_symmetry_check(&pot(1.0, 2, [0.0, 1.0, 9.0, 9.0, 9.0]));
        assert!(ok);
        assert_eq!(dev, 0.0);
    }

    proptest! {
        #[test]
        fn phi_symmetry_fails_for_generic_weights(
            u2 in 0.1f64..2.0,
            gap in 0.05f64..1.0,
        ) {
            let p = pot(1.0, 5, [0.0, 0.0, u2, -u2 + gap, 0.0]);
            let (ok, dev) = phi_symmetry_check(&p);
            prop_assert!(!ok);
            prop_assert!(dev > 0.04);
        }

        #[test]
        fn constructed_symmetric_weights_pass_phi_check(u2 in -2.0f64..2.0, t in 0.25f64..4.0) {
            let p = pot(t, 5, [0.0, 0.0, u2, -u2, 0.0]);
            let (ok, dev) = phi_symmetry_check(&p);
            prop_assert!(ok, "dev = {dev}");
        }
    }

    #[test]
    fn configuration_bits_round_trip() {
        for bits in 0..64u32 {
            let c = Configuration::from_bits(bits, 6, 1);
            assert_eq!(c.bits(), bits);
        }
    }
}

//! Exact Markov-chain analysis of small lattices: synchronous product
//! kernels and asynchronous single-site kernels applied on the fly,
//! invariant measures by power iteration, cylinder probabilities, the
//! projectivity and conditional identities, and boundary influence.

use serde::Serialize;

use crate::dynamics::{activation_table, PotentialSet, UpdateMode};
use crate::error::{Error, Result};
use crate::lattice::{Neighbour, NetworkTopology};

/// Exact treatment is capped at 2^12 states.
pub const SIZE_CAP: usize = 12;

/// Default L1 convergence tolerance for the power iteration.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default iteration budget for the power iteration.
pub const DEFAULT_MAX_ITER: u64 = 2_000_000;

/// A finite-state chain over the free-node configurations of a lattice,
/// with the boundary clamped to 0 or 1. States are bitmasks: bit `i` is
/// the state of the `i`-th free node in lexical order.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    n: usize,
    boundary: u8,
    mode: UpdateMode,
    /// Mask of free neighbours per node (never contains the node itself).
    free_nb_masks: Vec<u32>,
    /// Number of clamped boundary neighbours per node.
    boundary_counts: Vec<u8>,
    /// Activation probability by active-neighbour count, sigma(E(m)).
    prob_by_count: [f64; 5],
}

/// Builds the chain after checking the state-space cap.
pub fn build_chain(
    topology: &NetworkTopology,
    p: &PotentialSet,
    boundary: u8,
    mode: UpdateMode,
) -> Result<MarkovChain> {
    let n = topology.free_count();
    if n > SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            free: n,
            cap: SIZE_CAP,
        });
    }
    if boundary > 1 {
        return Err(Error::InvalidPlan(format!(
            "boundary value must be 0 or 1 (got {boundary})"
        )));
    }
    let mut free_nb_masks = vec![0u32; n];
    let mut boundary_counts = vec![0u8; n];
    for i in 0..n {
        for nb in topology.neighbours(i) {
            match nb {
                Neighbour::Free(j) => free_nb_masks[i] |= 1 << *j,
                Neighbour::Boundary(_) => boundary_counts[i] += 1,
            }
        }
    }
    let prob_by_count = activation_table(p);
    Ok(MarkovChain {
        n,
        boundary,
        mode,
        free_nb_masks,
        boundary_counts,
        prob_by_count,
    })
}

impl MarkovChain {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn state_count(&self) -> usize {
        1 << self.n
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn boundary(&self) -> u8 {
        self.boundary
    }

    /// Probability that node `i` becomes active out of configuration
    /// `state`. Independent of the node's own current state because
    /// coalitions range over strict neighbours only.
    pub fn activation_prob(&self, state: u32, node: usize) -> f64 {
        let m = (state & self.free_nb_masks[node]).count_ones()
            + self.boundary as u32 * self.boundary_counts[node] as u32;
        self.prob_by_count[m as usize]
    }

    /// One-step transition probability, materialised entry by entry.
    pub fn transition_probability(&self, from: u32, to: u32) -> f64 {
        match self.mode {
            UpdateMode::Synchronous => {
                let mut p = 1.0;
                for i in 0..self.n {
                    let p1 = self.activation_prob(from, i);
                    p *= if (to >> i) & 1 == 1 { p1 } else { 1.0 - p1 };
                }
                p
            }
            UpdateMode::AsynchronousUniform => {
                let inv_n = 1.0 / self.n as f64;
                let diff = from ^ to;
                match diff.count_ones() {
                    0 => {
                        let mut stay = 0.0;
                        for i in 0..self.n {
                            let p1 = self.activation_prob(from, i);
                            stay += if (from >> i) & 1 == 1 { p1 } else { 1.0 - p1 };
                        }
                        stay * inv_n
                    }
                    1 => {
                        let i = diff.trailing_zeros() as usize;
                        let p1 = self.activation_prob(from, i);
                        inv_n * if (to >> i) & 1 == 1 { p1 } else { 1.0 - p1 }
                    }
                    _ => 0.0,
                }
            }
        }
    }

    /// One step of the chain applied to a measure, without materialising
    /// the 2^n x 2^n kernel.
    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.state_count());
        match self.mode {
            UpdateMode::Synchronous => self.apply_synchronous(mu),
            UpdateMode::AsynchronousUniform => self.apply_asynchronous(mu),
        }
    }

    fn apply_synchronous(&self, mu: &[f64]) -> Vec<f64> {
        let size = self.state_count();
        let mut out = vec![0.0; size];
        let mut scratch = vec![0.0; size];
        for x in 0..size as u32 {
            // outgoing distribution of x is a product of per-node
            // Bernoullis; expand it by iterated doubling
            scratch[0] = mu[x as usize];
            let mut width = 1usize;
            for i in 0..self.n {
                let p1 = self.activation_prob(x, i);
                let p0 = 1.0 - p1;
                for j in 0..width {
                    let v = scratch[j];
                    scratch[j | (1 << i)] = v * p1;
                    scratch[j] = v * p0;
                }
                width <<= 1;
            }
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += *s;
            }
        }
        out
    }

    fn apply_asynchronous(&self, mu: &[f64]) -> Vec<f64> {
        let size = self.state_count();
        let inv_n = 1.0 / self.n as f64;
        let mut out = vec![0.0; size];
        for x in 0..size as u32 {
            let w = mu[x as usize];
            let mut stay = 0.0;
            for i in 0..self.n {
                let p1 = self.activation_prob(x, i);
                let (p_keep, p_flip) = if (x >> i) & 1 == 1 {
                    (p1, 1.0 - p1)
                } else {
                    (1.0 - p1, p1)
                };
                stay += p_keep;
                out[(x ^ (1 << i)) as usize] += w * inv_n * p_flip;
            }
            out[x as usize] += w * inv_n * stay;
        }
        out
    }
}

/// Probability vector over the 2^n free-node configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn uniform(n: usize) -> Self {
        let size = 1usize << n;
        Distribution {
            n,
            probs: vec![1.0 / size as f64; size],
        }
    }

    /// Wraps a raw vector (length must be 2^n). Normalisation is NOT
    /// enforced here so that corrupted vectors can be fed to the identity
    /// checks as negative controls.
    pub fn from_probs(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << n {
            return Err(Error::InvalidPlan(format!(
                "distribution over {n} nodes needs {} entries, got {}",
                1usize << n,
                probs.len()
            )));
        }
        Ok(Distribution { n, probs })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: u32) -> f64 {
        self.probs[state as usize]
    }

    /// Stationary marginal P(node i active).
    pub fn node_marginal(&self, node: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(x, _)| (x >> node) & 1 == 1)
            .map(|(_, p)| *p)
            .sum()
    }

    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn tv_distance(&self, other: &Distribution) -> f64 {
        0.5 * self.l1_distance(other)
    }
}

/// Invariant measure by power iteration from the uniform distribution,
/// declared converged when consecutive iterates differ by less than `tol`
/// in L1. Mass is renormalised only when accumulated rounding drifts it
/// visibly, so short runs stay bit-exact.
pub fn invariant_measure(chain: &MarkovChain, tol: f64, max_iter: u64) -> Result<Distribution> {
    let mut mu = Distribution::uniform(chain.node_count()).probs.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = chain.apply(&mu);
        residual = next
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        mu = next;
        let mass: f64 = mu.iter().sum();
        if (mass - 1.0).abs() > 1e-13 {
            for v in &mut mu {
                *v /= mass;
            }
        }
        if residual < tol {
            return Ok(Distribution {
                n: chain.node_count(),
                probs: mu,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Cylinder event `[active, inactive]`: the nodes of `active` are 1, the
/// nodes of `inactive` are 0, all other free nodes are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cylinder {
    pub active: u32,
    pub inactive: u32,
}

impl Cylinder {
    pub fn new(active: u32, inactive: u32) -> Self {
        Cylinder { active, inactive }
    }
}

/// Probability of a cylinder under a measure.
pub fn cylinder_probability(mu: &Distribution, cyl: Cylinder) -> Result<f64> {
    let all = (1u32 << mu.node_count()) - 1;
    if cyl.active & cyl.inactive != 0 || (cyl.active | cyl.inactive) & !all != 0 {
        return Err(Error::InvalidCylinder);
    }
    let mut sum = 0.0;
    for (x, p) in mu.probs().iter().enumerate() {
        let x = x as u32;
        if x & cyl.active == cyl.active && x & cyl.inactive == 0 {
            sum += *p;
        }
    }
    Ok(sum)
}

/// Maximal residual of the cylinder additivity identity
/// `mu[A,B] + mu[A\{i}, B+{i}] = mu[A\{i}, B]` over every cylinder and
/// pivot, plus the total-mass residual `|mu[(),()] - 1|` (which is what a
/// corrupted, unnormalised vector trips over). Must vanish for any
/// probability measure regardless of the dynamics.
pub fn check_projectivity_identities(mu: &Distribution) -> f64 {
    let n = mu.node_count();
    // Ternary table over constraint patterns: digit 0 = node forced
    // inactive, 1 = forced active, 2 = unconstrained.
    let mut pow3 = [1usize; 13];
    for i in 1..=n {
        pow3[i] = pow3[i - 1] * 3;
    }
    let mut table = vec![0.0f64; pow3[n]];
    for (x, p) in mu.probs().iter().enumerate() {
        let mut code = 0usize;
        for i in 0..n {
            if (x >> i) & 1 == 1 {
                code += pow3[i];
            }
        }
        table[code] = *p;
    }
    for i in 0..n {
        for code in 0..pow3[n] {
            if code / pow3[i] % 3 == 2 {
                table[code] = table[code - 2 * pow3[i]] + table[code - pow3[i]];
            }
        }
    }

    let mut max_residual = (table[pow3[n] - 1] - 1.0).abs(); // all digits 2
    for code in 0..pow3[n] {
        for i in 0..n {
            if code / pow3[i] % 3 == 1 {
                let with_inactive = table[code - pow3[i]];
                let marginal = table[code + pow3[i]];
                let residual = (table[code] + with_inactive - marginal).abs();
                max_residual = max_residual.max(residual);
            }
        }
    }
    max_residual
}

/// Maximal over nodes of the Bayes-identity residual: the stationary
/// marginal of a node must equal the mixture of its conditional activation
/// probability over the stationary cylinder weights of the remaining nodes.
pub fn check_conditional_identity(mu: &Distribution, chain: &MarkovChain) -> f64 {
    let n = mu.node_count();
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        let lhs = mu.node_marginal(i);
        let mut rhs = 0.0;
        for x in 0..mu.probs().len() as u32 {
            if (x >> i) & 1 == 1 {
                continue;
            }
            let pattern_mass = mu.prob(x) + mu.prob(x | (1 << i));
            rhs += chain.activation_prob(x, i) * pattern_mass;
        }
        max_residual = max_residual.max((lhs - rhs).abs());
    }
    max_residual
}

/// Boundary influence at the centre node, measured exactly.
#[derive(Debug, Clone, Serialize)]
pub struct InfluenceResult {
    /// Stationary centre marginal with the boundary clamped to 0.
    pub p0: f64,
    /// Stationary centre marginal with the boundary clamped to 1.
    pub p1: f64,
    pub delta: f64,
    pub tv_distance: f64,
    pub n_free: usize,
    pub mode: UpdateMode,
    #[serde(rename = "T")]
    pub temperature: f64,
}

/// Runs the chain under both clamped boundaries and compares the two
/// invariant measures.
pub fn boundary_influence(
    topology: &NetworkTopology,
    p: &PotentialSet,
    mode: UpdateMode,
    tol: f64,
    max_iter: u64,
) -> Result<InfluenceResult> {
    let chain0 = build_chain(topology, p, 0, mode)?;
    let chain1 = build_chain(topology, p, 1, mode)?;
    let mu0 = invariant_measure(&chain0, tol, max_iter)?;
    let mu1 = invariant_measure(&chain1, tol, max_iter)?;
    let centre = topology.central_index();
    let p0 = mu0.node_marginal(centre);
    let p1 = mu1.node_marginal(centre);
    Ok(InfluenceResult {
        p0,
        p1,
        delta: p1 - p0,
        tv_distance: mu0.tv_distance(&mu1),
        n_free: topology.free_count(),
        mode,
        temperature: p.temperature(),
    })
}

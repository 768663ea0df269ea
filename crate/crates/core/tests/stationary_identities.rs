//! End-to-end agreement between the exact stationary analysis and the
//! sampling estimators, plus the cylinder compatibility identities that any
//! stationary measure of these chains has to satisfy.

use tban::dynamics::{PotentialSet, UpdateMode};
use tban::lattice::{build_lattice, Neighbour};
use tban::markov::{
    boundary_influence, build_chain, check_conditional_identity, check_projectivity_identities,
    cylinder_probability, invariant_measure, Cylinder, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use tban::montecarlo::{boundary_influence_mc, simulate, McParams, SimulationPlan};
use tban::projectivity::SUBSET_MASKS;

fn potentials() -> PotentialSet {
    // Attractive pair with exponents -3/T and 3/T at the extreme
    // neighbourhoods; T = 2 keeps every chain fast-mixing.
    PotentialSet::new(2.0, 2, [-3.0, 1.5, 0.0, 0.0, 0.0]).unwrap()
}

#[test]
fn exact_stationary_measures_satisfy_both_identity_families() {
    for (w, h) in [(1, 1), (2, 1), (2, 2), (3, 2), (3, 3)] {
        let topology = build_lattice(w, h).unwrap();
        for mode in [UpdateMode::Synchronous, UpdateMode::AsynchronousUniform] {
            for boundary in [0u8, 1] {
                let chain = build_chain(&topology, &potentials(), boundary, mode).unwrap();
                let mu = invariant_measure(&chain, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
                let proj = check_projectivity_identities(&mu);
                let cond = check_conditional_identity(&mu, &chain);
                assert!(
                    proj < 1e-10,
                    "{w}x{h} {mode} boundary {boundary}: cylinder additivity residual {proj}"
                );
                assert!(
                    cond < 1e-10,
                    "{w}x{h} {mode} boundary {boundary}: conditional residual {cond}"
                );
            }
        }
    }
}

#[test]
fn sampled_neighbourhood_patterns_match_exact_cylinder_probabilities() {
    let topology = build_lattice(2, 2).unwrap();
    let p = potentials();
    let boundary = 1u8;
    let chain = build_chain(&topology, &p, boundary, UpdateMode::Synchronous).unwrap();
    let mu = invariant_measure(&chain, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let plan = SimulationPlan {
        topology: &topology,
        potentials: p,
        boundary,
        mode: UpdateMode::Synchronous,
        burn_in: 500,
        samples: 40_000,
        thinning: 1,
        seed: 23,
    };
    let out = simulate(&plan).unwrap();

    let centre = topology.central_index();
    for (c, &inactive_slots) in SUBSET_MASKS.iter().enumerate() {
        let active_slots = !inactive_slots & 0xF;
        // Translate the slot pattern into a cylinder over free nodes; slots
        // held by clamped cells make the pattern infeasible unless they
        // agree with the boundary value.
        let mut feasible = true;
        let (mut active, mut inactive) = (0u32, 0u32);
        for (slot, nb) in topology.neighbours(centre).iter().enumerate() {
            let want_active = (active_slots >> slot) & 1 == 1;
            match *nb {
                Neighbour::Free(j) => {
                    if want_active {
                        active |= 1 << j;
                    } else {
                        inactive |= 1 << j;
                    }
                }
                Neighbour::Boundary(_) => {
                    if want_active != (boundary == 1) {
                        feasible = false;
                    }
                }
            }
        }
        let exact = if feasible {
            cylinder_probability(&mu, Cylinder { active, inactive }).unwrap()
        } else {
            0.0
        };
        let freq = out.neighbourhood.freq(c);
        if !feasible {
            assert_eq!(freq, 0.0, "pattern {c} is infeasible yet was observed");
        } else {
            assert!(
                (freq - exact).abs() < 0.02,
                "pattern {c}: sampled {freq} vs exact {exact}"
            );
        }
    }
}

#[test]
fn sampled_boundary_influence_matches_the_exact_computation() {
    let topology = build_lattice(3, 2).unwrap();
    let p = potentials();
    let exact = boundary_influence(
        &topology,
        &p,
        UpdateMode::Synchronous,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
    .unwrap();
    let params = McParams { burn_in: 1000, samples: 60_000, thinning: 1, seed: 2718 };
    let mc = boundary_influence_mc(&topology, &p, UpdateMode::Synchronous, &params).unwrap();
    assert!(
        (mc.delta - exact.delta).abs() < 4.0 * mc.stderr,
        "sampled {} vs exact {} (stderr {})",
        mc.delta,
        exact.delta,
        mc.stderr
    );
    assert!((mc.p0.mean - exact.p0).abs() < 4.0 * mc.p0.stderr.max(1e-4));
    assert!((mc.p1.mean - exact.p1).abs() < 4.0 * mc.p1.stderr.max(1e-4));
    // The influence is a marginal difference, so it can never exceed the
    // total variation distance between the two stationary measures.
    assert!(exact.tv_distance >= exact.delta.abs() - 1e-12);
}

//! Threshold Boolean automata networks on finite 2D lattices.
//!
//! The crate is organised around one pipeline:
//!
//! * [`lattice`] — rectangular regions of Z² with von Neumann neighbourhoods,
//!   clamped external boundaries and generic digraph notions (eccentricity,
//!   centre, boundary) plus structural weight checks.
//! * [`dynamics`] — interaction potentials, the nonlinear coalition term, the
//!   stochastic local rule and its deterministic threshold counterpart, and
//!   the closed-form symmetry conditions.
//! * [`projectivity`] — the 16x16 neighbourhood-reduction matrix whose
//!   singularity is the necessary condition for phase transition, together
//!   with the alternating-sum criterion.
//! * [`markov`] — exact finite-state Markov chains for small lattices:
//!   invariant measures, cylinder probabilities and boundary influence.
//! * [`montecarlo`] — seeded Monte Carlo estimation of the same observables
//!   on lattices too large for exact treatment, plus parameter sweeps.

pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod markov;
pub mod montecarlo;
pub mod projectivity;

pub use error::{Error, Result};

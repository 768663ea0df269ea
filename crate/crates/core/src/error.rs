//! Crate-wide error type.

use crate::lattice::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice dimensions {width}x{height}: both must be >= 1")]
    InvalidDimensions { width: u32, height: u32 },

    #[error("vertex {0} is not in the digraph")]
    VertexNotFound(NodeId),

    #[error("arc {from} -> {to} must carry a nonzero weight")]
    ZeroWeightArc { from: NodeId, to: NodeId },

    #[error("temperature must be > 0 (got {0})")]
    InvalidTemperature(f64),

    #[error("nonlinearity order must lie in 2..=5 (got {0})")]
    InvalidOrder(u8),

    #[error("potential {name} must be finite (got {value})")]
    NonFinitePotential { name: &'static str, value: f64 },

    #[error("{free} free nodes exceed the exact state-space cap of {cap}")]
    SizeCapExceeded { free: usize, cap: usize },

    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: u64, residual: f64 },

    #[error("cylinder index sets must be disjoint subsets of the free nodes")]
    InvalidCylinder,

    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("matrix must be square and non-empty")]
    NotSquare,
}

pub type Result<T> = std::result::Result<T, Error>;

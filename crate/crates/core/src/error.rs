use alloc::boxed::Box;
use alloc::string::String;

use crate::metrics::RefineOutcome;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("eigensolver did not converge after {iterations} operator applications (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("refinement stopped after {} iterations with gradient norm {:e}", .best.iterations, .best.gradient_norm)]
    RefineNoConvergence { best: Box<RefineOutcome> },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("measurement graph is disconnected")]
    DisconnectedGraph,

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("operation requires full-pose measurements")]
    Mode,

    #[error("graphs differ in topology or precisions")]
    TopologyMismatch,

    #[error("spectral gap must be positive, got {0:e}")]
    NonPositiveGap(f64),

    #[error("invalid measurement on edge {edge}: {reason}")]
    InvalidMeasurement { edge: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

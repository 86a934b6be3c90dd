//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by spaces, functions, estimators, and fitters.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside domain: {0}")]
    OutsideDomain(String),

    #[error("point does not belong to this space")]
    SpaceMismatch,

    #[error("non-finite coordinate in point")]
    NonFinitePoint,

    #[error("isolated point: no ball sample accepted after {trials} trials at radius {radius}")]
    IsolatedPoint { trials: usize, radius: f64 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("gradient unavailable: {0}")]
    GradientUnavailable(String),

    #[error("evaluation failed: {0}")]
    EvalFailed(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

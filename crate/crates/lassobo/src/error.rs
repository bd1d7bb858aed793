use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("factorization not positive definite after jitter levels {attempted:?}")]
    Factorization { attempted: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),
}

pub type Result<T> = std::result::Result<T, Error>;

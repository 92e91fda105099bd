//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral radius estimate did not converge within {iterations} iterations (best estimate {best_estimate:.6e})")]
    Convergence {
        best_estimate: f64,
        iterations: usize,
    },

    #[error("singular system: {0}; use lambda > 0 to regularize")]
    Singular(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("network build failed: {0}")]
    Build(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("data format: {0}")]
    DataFormat(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

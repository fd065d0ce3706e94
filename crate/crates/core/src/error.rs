//! Library-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("optimization domain infeasible: {0}")]
    Infeasible(String),

    #[error("rate share violation on subcarrier {subcarrier}: shares sum to {share_sum:.6} but common capacity is {capacity:.6}")]
    ShareViolation {
        subcarrier: usize,
        share_sum: f64,
        capacity: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

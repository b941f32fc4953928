//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by grid construction, estimators, calibration and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient sample for {context}: need at least {needed} curves, got {got}")]
    InsufficientSample {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate null distribution: {0}")]
    DegenerateNull(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for input errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure(_) | Error::DegenerateNull(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

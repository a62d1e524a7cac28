use thiserror::Error;

/// Errors raised by the risk, optimization, diagnostic and data routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid risk parameters: {0}")]
    InvalidParams(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid non-monotonicity witness: {0}")]
    InvalidWitness(String),

    #[error("iterate became non-finite at step {step}; the step size is likely too large")]
    DivergedState { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("dataset is empty after preprocessing")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<X> = std::result::Result<X, Error>;

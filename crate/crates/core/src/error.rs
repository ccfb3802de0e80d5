use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty column block")]
    EmptyBlock,

    #[error("column block is full (capacity {capacity}); evict before appending")]
    CapacityExceeded { capacity: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("coefficient normalization 1ᵀz is zero or not finite")]
    DegenerateNormalization,

    #[error("lambda search did not reach the norm target (relative residual {residual:e})")]
    BracketFailure { residual: f64 },

    #[error("schedule leaves the iteration class: {0}")]
    ClassViolation(String),

    #[error("schedule cannot be expressed as an L-matrix recurrence: {0}")]
    UnsupportedSchedule(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite value encountered at iteration {iter}")]
    NonFinite { iter: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis dimension {dim} exceeds the configured limit {limit}")]
    ResourceLimit { dim: usize, limit: usize },

    #[error("mode index {index} outside the cutoff range -{cutoff}..={cutoff}")]
    ModeOutOfRange { index: i64, cutoff: i64 },

    #[error("operators built on different bases")]
    BasisMismatch,

    #[error("quadrature did not reach the requested tolerance: {0}")]
    Quadrature(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("linear solve failure: {0}")]
    Solver(String),

    #[error("temporal supports are not disjoint: {0}")]
    SupportOverlap(String),

    #[error("operation requires a dense matrix but dimension {0} exceeds the dense cutoff")]
    DenseTooLarge(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

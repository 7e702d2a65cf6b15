use thiserror::Error;

/// Errors raised by the solver and its supporting kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("value outside its domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-positive slowness {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("singular pivot at elimination step {step} (|pivot| = {magnitude:e})")]
    SingularPivot { step: usize, magnitude: f64 },

    #[error("GMRES breakdown at iteration {0}")]
    Breakdown(usize),

    #[error("too many layers: {0}")]
    TooManyLayers(String),

    #[error("too many cells: {0}")]
    TooManyCells(String),

    #[error("near-singular diagonal block {block} (condition estimate {condition:e})")]
    NearSingularBlock { block: usize, condition: f64 },

    #[error("inconsistent partition: {0}")]
    InconsistentPartition(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("no action registered for configuration type {0}")]
    MissingAction(&'static str),

    #[error("chart out of validity: {0}")]
    ChartOutOfRange(String),

    #[error("CFL condition violated: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("step too large: |A|·h = {0:.3e} > 1")]
    StepTooLarge(f64),

    #[error("reconstruction obstructed: {0}")]
    Obstructed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

use thiserror::Error;

/// Errors raised by the detection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("{what} is only defined for dimension {supported}, got {got}")]
    UnsupportedDimension {
        what: &'static str,
        supported: &'static str,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A physical invariant (hermiticity, positivity, normalization) failed.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Externally supplied data failed validation.
    #[error("data validation failed: {0}")]
    DataValidation(String),

    #[error("table does not fit witness `{witness}`; missing cells (y, x, j): {missing}")]
    ShapeMismatch { witness: String, missing: String },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Physics,
    Convergence,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ContractViolation(_) => ErrorKind::Physics,
            Error::NonConvergence(_) => ErrorKind::Convergence,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

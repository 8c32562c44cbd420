use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("singular frame: smallest metric eigenvalue {min_eigenvalue:e} <= threshold {threshold:e}")]
    SingularFrame { min_eigenvalue: f64, threshold: f64 },
    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} <= floor {floor:e}")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },
    #[error("operator is singular")]
    SingularOperator,
    #[error("parameter point outside family domain: {0}")]
    OutOfDomain(String),
    #[error("operation needs at least {needed} parameters, family has {found}")]
    InsufficientParameters { needed: usize, found: usize },
    #[error("representation mismatch: expected {expected}, found {found}")]
    RepMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("self-consistency loop did not converge after {iterations} iterations (last change {residual:e})")]
    ScNotConverged { iterations: usize, residual: f64 },
    #[error("eigenvalue gap {gap:e} below degeneracy tolerance")]
    DegenerateState { gap: f64 },
    #[error("ambient operator not available for this model")]
    AmbientUnavailable,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

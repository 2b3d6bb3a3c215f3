use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point outside chart: |z| = {norm} exceeds radius {radius}")]
    OutsideChart { norm: f64, radius: f64 },
    #[error("metric and symplectic form cannot be normalized at this point")]
    DegenerateMetric,
    #[error("metric is not positive: {0}")]
    NotPositive(String),
    #[error("quadrature under-resolved: {0}")]
    Underresolved(String),
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(usize, usize),
    #[error("unsupported for this model: {0}")]
    Unsupported(String),
    #[error("did not converge: {0}")]
    NotConverged(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("inconsistent Chern data: {0}")]
    InconsistentChernData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

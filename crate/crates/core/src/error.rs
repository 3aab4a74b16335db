use thiserror::Error;

/// Errors produced by the separation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance is rank-deficient: eigenvalue {eigenvalue:e} <= {threshold:e}")]
    RankDeficientCovariance { eigenvalue: f64, threshold: f64 },

    #[error("selected support is rank-deficient at atoms {atoms:?}")]
    RankDeficientSupport { atoms: Vec<usize> },

    #[error("source {index} has no energy at iteration {iteration}")]
    DeadSource { index: usize, iteration: usize },

    #[error("noise covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("estimated mixing matrix is rank-deficient")]
    RankDeficientMixing,

    #[error("signal has zero variance")]
    ZeroVariance,

    #[error("FastICA unit {unit} did not converge after {iterations} iterations (final delta {delta:e})")]
    NotConverged {
        unit: usize,
        iterations: usize,
        delta: f64,
    },

    #[error("pursuit failed for source {index} at iteration {iteration}: {inner}")]
    Pursuit {
        index: usize,
        iteration: usize,
        inner: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

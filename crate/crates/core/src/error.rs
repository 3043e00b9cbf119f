use thiserror::Error;

/// Errors raised by the optimizer, objectives, bounds and enumeration code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("atom probabilities sum to {sum}, expected 1")]
    Unnormalized { sum: f64 },

    #[error("adam bound requires beta2 < 1; use the adagrad bound for beta2 = 1")]
    UseAdagradBound,

    #[error("gradient bound R = {r} is below sqrt(epsilon) = {sqrt_eps}")]
    GradientBoundTooSmall { r: f64, sqrt_eps: f64 },

    #[error("enumeration needs {paths} paths, limit is {limit}; shrink the atom count or the horizon")]
    TooManyPaths { paths: f64, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

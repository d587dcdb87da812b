use thiserror::Error;

/// Errors raised by the model, policy and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("value {value} outside support [{lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },
    #[error("density vanishes at {0}")]
    ZeroDensity(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("zero bid where a positive bid is required")]
    ZeroBid,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("no convergence after {iterations} iterations (last change {delta:e})")]
    NotConverged { iterations: usize, delta: f64 },
    #[error("tabulated distribution: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

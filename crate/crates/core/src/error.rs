use thiserror::Error;

/// Errors produced by the analytic engine, the Monte Carlo oracle and the planner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The model specification is malformed (dimensions, ranges, positive definiteness).
    #[error("invalid model: {0}")]
    Model(String),

    /// A numeric routine received NaN or produced a value outside its contract.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Moments are mutually inconsistent, e.g. a clearly negative deviation variance.
    #[error("inconsistent moments: {0}")]
    Inconsistent(String),

    /// The two sample means coincide, so the discriminant direction is undefined.
    #[error("degenerate sample: sample means coincide")]
    DegenerateSample,

    /// Invalid Monte Carlo or planner configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn model_err(msg: impl Into<String>) -> Error {
    Error::Model(msg.into())
}

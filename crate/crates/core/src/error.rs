//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance is not positive semi-definite: {0}")]
    NonPsdCovariance(String),

    #[error("matrix is singular: {0}")]
    SingularMatrix(String),

    #[error("enumeration limit exceeded: {0}")]
    LimitExceeded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target coincides with the sensor position; bearing undefined")]
    UndefinedBearing,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

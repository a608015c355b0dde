use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbiError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample set too small: need at least {needed} points, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("zero nearest-neighbour radius (duplicate points) at sample {index}")]
    ZeroRadius { index: usize },
    #[error("covariance matrix is singular even after jitter")]
    SingularCovariance,
    #[error("initial state lies outside the prior support")]
    OutsideSupport,
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, SbiError>;

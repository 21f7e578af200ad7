use thiserror::Error;

/// Errors produced by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid point measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is not stationary: {0}")]
    NotStationary(String),

    #[error("tail window too short: need {needed} forward lags, got {got}")]
    WindowTooShort { needed: usize, got: usize },

    #[error("too few exceedances: got {got}, need at least {need}")]
    TooFewExceedances { got: usize, need: usize },

    #[error("rejection sampler gave up after {0} attempts")]
    RejectionCapExceeded(u64),

    #[error("sample too small: got {got} points, need at least {need}")]
    SampleTooSmall { got: usize, need: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

use thiserror::Error;

/// Errors raised across the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("training diverged at episode {episode} (loss {loss:e}); try a smaller learning rate")]
    Divergence { episode: usize, loss: f64 },

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(e.to_string())
        } else {
            Error::Io(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

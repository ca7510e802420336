use thiserror::Error;

/// Errors produced by the soft-bit compression pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its supported range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller passed arguments with inconsistent shapes or lengths.
    #[error("usage error: {0}")]
    Usage(String),

    /// A numeric argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A coded blob or serialized artifact could not be decoded.
    #[error("decode error: {0}")]
    Decode(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

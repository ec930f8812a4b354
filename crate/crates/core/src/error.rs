//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents; `offset` is the byte position at which
    /// the problem was detected.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    Training(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any operation in this crate.
#[derive(Error, Debug)]
pub enum Error {
    /// Tensor/kernel/volume dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A network description could not be realized.
    #[error("build error in {stage}: {msg}")]
    Build { stage: String, msg: String },

    /// A file did not match its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// The format is recognized but the variant is not handled.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid configuration or argument value.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset-level problem (empty class, missing case, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

//! Crate-wide error type.
//!
//! Shape mismatches in the numeric hot path are programmer errors and panic;
//! everything reachable from user input (files, formats, training data)
//! surfaces as an [`Error`].

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("non-finite loss at update {update}")]
    NonFiniteLoss { update: usize },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::MalformedLine {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

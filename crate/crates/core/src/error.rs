use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which image axis a dimension error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Height,
    Width,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Height => f.write_str("height"),
            Axis::Width => f.write_str("width"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{axis} {size} is not divisible by {divisor}")]
    Dimension {
        axis: Axis,
        size: usize,
        divisor: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    EmptyInput(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("unsupported variant: {0}")]
    Unsupported(String),

    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("request {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or unreadable input data.
    Data,
    /// A numeric precondition or contract was violated.
    Contract,
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension { .. } | Error::Shape(_) | Error::InvalidParameter { .. } => {
                ErrorClass::Contract
            }
            Error::Batch { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }
}

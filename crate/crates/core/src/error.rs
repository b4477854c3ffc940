use std::path::PathBuf;

/// Errors produced across the sensing pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("no detection: {0}")]
    NoDetection(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed data in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status for this error: 2 usage/validation, 3 data format, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Range(_) | Error::Validation(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::DivisionByZero(_) | Error::NoDetection(_) | Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

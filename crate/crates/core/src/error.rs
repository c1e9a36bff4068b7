use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TsbError>;

/// Broad failure class, used by the CLI to pick an exit code and prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numerical => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Error)]
pub enum TsbError {
    #[error("{0}")]
    Usage(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("malformed model document: {0}")]
    ModelDocument(String),

    #[error("{0}")]
    Selector(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl TsbError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            TsbError::Usage(_) | TsbError::Selector(_) => ErrorCategory::Usage,
            TsbError::Numerical(_) => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TsbError::Io {
            path: path.into(),
            source,
        }
    }
}

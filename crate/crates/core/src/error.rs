use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Format(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Shape(String),

    #[error("{0}")]
    Capacity(String),

    #[error("{0}")]
    Parameter(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, stable across releases and used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    Format,
    Data,
    Shape,
    Capacity,
    Parameter,
    Numerical,
    Config,
    Io,
}

impl ErrorCategory {
    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Format => "FormatError",
            ErrorCategory::Data => "DataError",
            ErrorCategory::Shape => "ShapeError",
            ErrorCategory::Capacity => "CapacityError",
            ErrorCategory::Parameter => "ParameterError",
            ErrorCategory::Numerical => "NumericalError",
            ErrorCategory::Config => "ConfigError",
            ErrorCategory::Io => "IoError",
        }
    }

    /// sysexits-style process exit code.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Parameter => 64,
            ErrorCategory::Format | ErrorCategory::Data => 65,
            ErrorCategory::Shape => 66,
            ErrorCategory::Capacity => 69,
            ErrorCategory::Numerical => 70,
            ErrorCategory::Io => 74,
            ErrorCategory::Config => 78,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Format(_) => ErrorCategory::Format,
            Error::NonFinite { .. } | Error::Data(_) => ErrorCategory::Data,
            Error::Shape(_) => ErrorCategory::Shape,
            Error::Capacity(_) => ErrorCategory::Capacity,
            Error::Parameter(_) => ErrorCategory::Parameter,
            Error::Numerical(_) => ErrorCategory::Numerical,
            Error::Config { .. } => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Parse,
    Numeric,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Parse => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {term}")]
    NonFinite { term: String },

    #[error("invalid input: {0}")]
    Usage(String),

    /// A closed-form result was requested outside the region where it holds.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged { epoch: usize, reason: String },

    #[error(transparent)]
    Amc(#[from] crate::mocap::AmcError),

    #[error("{path}: {source}")]
    AmcFile {
        path: PathBuf,
        #[source]
        source: crate::mocap::AmcError,
    },

    #[error("model file {path}: {reason}")]
    ModelFormat { path: String, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DimensionMismatch { .. } | Error::Usage(_) | Error::Domain(_) => ErrorClass::Usage,
            Error::Config(_) => ErrorClass::Usage,
            Error::NonFinite { .. } | Error::TrainingDiverged { .. } => ErrorClass::Numeric,
            Error::Amc(_) | Error::AmcFile { .. } | Error::ModelFormat { .. } => ErrorClass::Parse,
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv { source, .. } => {
                if source.is_io_error() {
                    ErrorClass::Io
                } else {
                    ErrorClass::Parse
                }
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn non_finite(term: impl Into<String>) -> Self {
        Error::NonFinite { term: term.into() }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

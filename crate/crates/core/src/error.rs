use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a function, e.g. `|t| >= 1` for `F_beta`.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter is out of range for the requested operation.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical routine failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Exhaustive computation requested beyond the supported size.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Input violates a structural contract (shape, symmetry, index range).
    #[error("contract error: {0}")]
    Contract(String),

    /// Invalid configuration or command usage.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line runner: 2 for usage and
    /// input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Capacity(_) => 3,
            Error::Domain(_)
            | Error::Parameter(_)
            | Error::Contract(_)
            | Error::Usage(_)
            | Error::Io { .. }
            | Error::Format(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

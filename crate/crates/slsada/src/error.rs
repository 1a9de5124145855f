use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
///
/// The CLI maps variants onto exit codes: usage problems exit 2, data
/// problems exit 3, numerical failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally invalid data (bad shapes, non-finite values, bad labels).
    #[error("{0}")]
    InvalidData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Numerical failure in a solver step (singular systems, failed
    /// factorizations, non-finite intermediates).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Attach an outer-loop iteration index to a solver error.
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Numerical(msg) => {
                Error::Numerical(format!("iteration {iteration}: {msg}"))
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

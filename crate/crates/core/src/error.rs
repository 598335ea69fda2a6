use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure in {context}: {detail}")]
    NumericalFailure { context: String, detail: String },

    #[error("{context} did not converge after {iterations} iterations: {detail}")]
    NonConvergence {
        context: String,
        iterations: usize,
        detail: String,
    },

    #[error("every grid point failed: {}", .0.join("; "))]
    AllFailed(Vec<String>),

    #[error("curve {id}: {source}")]
    Curve {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("EM iteration {iteration}: {source}")]
    EmStep {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

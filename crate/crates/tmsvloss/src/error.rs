use std::path::PathBuf;

use tmsvloss_core::Error as CoreError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Validation(_) | Error::Parse { .. } => 2,
            Error::Numeric(_) => 3,
            Error::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl From<CoreError> for Error {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonFiniteDerivative { .. }
            | CoreError::UnexplainedBin { .. }
            | CoreError::Singular { .. } => Error::Numeric(e.to_string()),
            _ => Error::Validation(e.to_string()),
        }
    }
}

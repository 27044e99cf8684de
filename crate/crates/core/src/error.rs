use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants split into two families: input problems (bad parameters,
/// malformed files, violated preconditions) and runtime failures (I/O,
/// exhausted scan sources). [`Error::is_validation`] tells them apart; the
/// CLI maps the first family to exit code 1 and the second to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid point {point} coincides with array element {element}")]
    Singularity { point: usize, element: usize },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scan source exhausted")]
    SourceExhausted,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than the runtime.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parameter { .. }
            | Error::Precondition(_)
            | Error::Singularity { .. }
            | Error::Config { .. }
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Wav(e) => !matches!(e, hound::Error::IoError(_)),
            Error::SourceExhausted | Error::Io { .. } => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

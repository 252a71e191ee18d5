use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a precondition or schema rule.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown concept id `{0}`")]
    UnknownConcept(String),

    /// A line-oriented input could not be parsed.
    #[error("{source_name}:{line}: {message}: {raw:?}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
        raw: String,
    },

    /// Model response that does not follow the labelled-sentence grammar.
    #[error("unparseable model output (line {line}: {raw_line:?})")]
    ModelOutput {
        line: usize,
        raw_line: String,
        raw: String,
    },

    #[error("backend error: {0}")]
    Backend(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than transport or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::UnknownConcept(_) | Error::Parse { .. } | Error::Json(_)
        )
    }
}

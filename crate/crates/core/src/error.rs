use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("unknown {category} token `{token}`")]
    UnknownToken { category: String, token: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("coincident objects `{0}` and `{1}`")]
    CoincidentObjects(String, String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("unparseable by template grammar: `{0}`")]
    Unparseable(String),

    #[error("no referent in instruction")]
    NoReferent,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("generation failed: {0}")]
    Generation(String),
}

impl Error {
    /// True for failures of the filesystem rather than of the input data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: field `{field}`: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        field: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no interactions in {0}")]
    NoInteractions(PathBuf),

    #[error("all users were filtered out")]
    EmptyAfterFilter,

    #[error("user {user}: only {eligible} items eligible as negatives, {requested} requested")]
    InsufficientNegatives {
        user: u64,
        eligible: usize,
        requested: usize,
    },

    #[error("unknown item {0}")]
    UnknownItem(u64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("expert item {0} missing from its candidate set")]
    ExpertMissing(u64),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("rank maps cover different items")]
    MismatchedRankings,

    #[error("missing users in evaluation: {0:?}")]
    MissingUsers(Vec<u64>),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

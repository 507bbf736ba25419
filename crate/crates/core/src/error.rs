use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("group {group} has no selections; its preference ratio is undefined")]
    EmptyGroupActivity { group: usize },

    #[error("bias disparity is undefined for a zero input bias")]
    ZeroInputBias,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid interaction data: {0}")]
    InvalidMatrix(String),

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("user {user} already selected item {item}")]
    AlreadySelected { user: usize, item: usize },

    #[error("recommendation list is empty")]
    EmptyRecommendations,

    #[error("top recommendation has zero utility")]
    ZeroTopUtility,

    #[error("infeasible configuration: {0}")]
    ConfigInfeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{source_name}: malformed line {line}: {reason}")]
    MalformedLine {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("group {group} has {available} users, {requested} requested")]
    InsufficientGroup {
        group: usize,
        available: usize,
        requested: usize,
    },

    #[error("missing input: {0}")]
    MissingRun(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

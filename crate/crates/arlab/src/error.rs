use std::path::PathBuf;

/// Errors surfaced by fallible operations: file ingestion, configuration
/// validation, and data-dependent degeneracies.
///
/// Shape mismatches between in-memory matrices are programmer errors and
/// panic instead (see [`crate::linalg::Matrix`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad IDX file {path} at byte offset {offset}: {message}")]
    IdxFormat {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("csv parse error in {path} line {line}: {message}")]
    CsvParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("non-finite gradient in {what}; step aborted")]
    NonFiniteGradient { what: String },

    #[error("clustering error: {0}")]
    Cluster(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

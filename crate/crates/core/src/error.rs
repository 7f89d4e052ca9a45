use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SnmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SnmError {
    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },

    #[error("rejected record: {0}")]
    RejectedRecord(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("division degenerate: {0}")]
    DivisionDegenerate(String),

    #[error("invalid period [{start_ms}, {end_ms}): start must be before end")]
    InvalidPeriod { start_ms: i64, end_ms: i64 },

    #[error("invalid SLA target: {0}")]
    InvalidTarget(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

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
}

impl SnmError {
    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        SnmError::NotFound {
            kind,
            id: id.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SnmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        SnmError::Json {
            path: path.into(),
            source,
        }
    }
}

/// Reads and deserializes a JSON document.
pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SnmError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SnmError::json(path, e))
}

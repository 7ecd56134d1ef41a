use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{file}:{line}:{column}: {reason}")]
    Parse {
        file: String,
        line: u64,
        column: u64,
        reason: String,
    },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("cannot encode column `{column}`: unknown value `{value}`")]
    Encoding { column: String, value: String },

    #[error("unresolvable codes: {}", .codes.join(", "))]
    Lookup { codes: Vec<String> },

    #[error("row alignment mismatch: {0}")]
    Alignment(String),

    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("corrupt file {}: {reason}", .path.display())]
    Corruption { path: PathBuf, reason: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("invalid state: {0}")]
    State(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stale or missing artifact, rerun stage `{stage}`: {reason}")]
    Stale { stage: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn stale(stage: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Stale {
            stage: stage.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stale { .. } => 3,
            Error::Numeric(_) => 4,
            _ => 2,
        }
    }
}

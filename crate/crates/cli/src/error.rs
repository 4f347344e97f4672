use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    /// Malformed JSON or a schema violation; `field` is the dotted path to the offender.
    #[error("{path}: invalid config at `{field}`: {message}")]
    Schema { path: PathBuf, field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] macrophase_core::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "read",
            CliError::Write { .. } => "write",
            CliError::Schema { .. } => "schema",
            CliError::Usage(_) => "usage",
            CliError::Model(e) => e.kind(),
            CliError::Csv(_) | CliError::Json(_) => "output",
        }
    }

    /// One-line JSON object printed on stderr before a nonzero exit.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "status": "error", "kind": self.kind(), "message": self.to_string() });
        if let CliError::Schema { field, .. } = self {
            v["field"] = json!(field);
        }
        if let CliError::Model(macrophase_core::Error::AtTime { t, .. }) = self {
            v["t"] = json!(t);
        }
        v
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

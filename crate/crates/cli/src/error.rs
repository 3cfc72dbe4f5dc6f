use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] proxylab::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(field: &'static str, msg: impl Into<String>) -> Self {
        CliError::Config {
            field,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } | CliError::ConfigParse { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Core(proxylab::Error::Io(_)) => "io",
            CliError::Core(proxylab::Error::Shape { .. }) => "shape",
            CliError::Core(proxylab::Error::Parse { .. }) => "parse",
            CliError::Core(proxylab::Error::Config(_)) => "config",
            CliError::Core(_) => "numeric",
            CliError::Csv(_) | CliError::Json(_) => "io",
        }
    }

    /// Machine-readable form printed on stderr by the binary.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Config { field, .. } = self {
            v["field"] = json!(field);
        }
        v
    }
}

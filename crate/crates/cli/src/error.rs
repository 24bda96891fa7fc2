use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input file not found: {}", path.display())]
    MissingInput { path: PathBuf },

    #[error("run artifact not found: {}", path.display())]
    MissingArtifact { path: PathBuf },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Validation {
        context: String,
        #[source]
        source: pie_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Wraps a library error; I/O failures keep their exit code.
    pub fn core(context: impl Into<String>, source: pie_core::Error) -> Self {
        match source {
            pie_core::Error::Io(e) => CliError::Io {
                path: PathBuf::from(context.into()),
                source: e,
            },
            other => CliError::Validation {
                context: context.into(),
                source: other,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput { .. } => "MissingInput",
            CliError::MissingArtifact { .. } => "MissingArtifact",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::Usage(_) => "UsageError",
            CliError::Validation { source, .. } => source.kind(),
            CliError::Io { .. } => "IoError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::MissingInput { path }
            | CliError::MissingArtifact { path }
            | CliError::Io { path, .. } => {
                v["path"] = json!(path.display().to_string());
            }
            CliError::Validation { context, .. } => {
                v["context"] = json!(context);
            }
            _ => {}
        }
        v
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

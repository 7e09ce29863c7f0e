use std::path::{Path, PathBuf};

use sentinel_core::trace::TraceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        CliError::Invalid(msg.to_string())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn trace(path: &Path, e: TraceError) -> Self {
        match e {
            TraceError::Io(source) => CliError::io(path, source),
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    /// One JSON object per failure so scripts can parse stderr.
    pub fn diagnostic(&self) -> String {
        let kind = match self {
            CliError::Invalid(_) => "invalid",
            CliError::Io { .. } => "io",
        };
        serde_json::json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

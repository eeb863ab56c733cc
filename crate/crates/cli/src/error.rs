use std::path::{Path, PathBuf};

use ace_core::{AceError, PipelineError, Stage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("corrupt input {path}: {reason}")]
    CorruptInput { path: PathBuf, reason: String },

    #[error("estimation failed at stage '{stage}': {source}")]
    Estimation {
        stage: Stage,
        #[source]
        source: AceError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::CorruptInput { .. } => 65,
            CliError::Estimation { .. } => 70,
            CliError::Io { .. } => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn corrupt(path: &Path, reason: impl ToString) -> Self {
        CliError::CorruptInput {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Estimation {
            stage: e.stage,
            source: e.source,
        }
    }
}

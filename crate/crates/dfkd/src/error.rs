use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DfkdError {
    /// Something the user has to fix before a run can start.
    #[error("setup: {0}")]
    Setup(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dfkd_core::Error),
    /// Non-finite loss during training.
    #[error("training diverged at epoch {epoch}, {phase} step {step}: {detail}")]
    Diverged { epoch: usize, phase: &'static str, step: usize, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

impl DfkdError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Self::Format { path: path.into(), detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, DfkdError>;

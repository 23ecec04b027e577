//! Binary checkpoints for teachers and distillation runs.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::DatasetId;
use crate::distill::RunState;
use crate::error::{DfkdError, Result};
use crate::models::Architecture;
use crate::nn::Network;
use crate::teacher::TeacherReport;

const FORMAT_VERSION: u32 = 1;

/// Crate version plus the git revision the binary was built from.
pub fn code_version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("DFKD_GIT_REV"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeacherCheckpoint {
    pub dataset: DatasetId,
    pub arch: Architecture,
    pub net: Network<f32>,
    pub report: TeacherReport,
    pub config_hash: String,
    pub code_version: String,
}

/// Run state at an epoch boundary. The per-epoch RNG is a pure function of
/// `state.config.seed` and `state.next_epoch`, so no generator state is stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub state: RunState,
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format_version: u32,
    kind: String,
    body: T,
}

fn save<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<()> {
    let bytes = bincode::serialize(&Envelope { format_version: FORMAT_VERSION, kind: kind.to_string(), body })
        .map_err(|e| DfkdError::format(path, e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| DfkdError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| DfkdError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| DfkdError::io(path, e))
}

fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| DfkdError::io(path, e))?;
    let env: Envelope<T> = bincode::deserialize(&bytes).map_err(|e| DfkdError::format(path, format!("unreadable checkpoint: {e}")))?;
    if env.format_version != FORMAT_VERSION || env.kind != kind {
        return Err(DfkdError::format(
            path,
            format!("expected a {kind} checkpoint v{FORMAT_VERSION}, found {} v{}", env.kind, env.format_version),
        ));
    }
    Ok(env.body)
}

impl TeacherCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        save(path, "teacher", self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(DfkdError::Setup(format!(
                "teacher checkpoint {} not found; create it with `dfkd train-teacher`",
                path.display()
            )));
        }
        load(path, "teacher")
    }
}

impl RunCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        save(path, "run", self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load(path, "run")
    }
}

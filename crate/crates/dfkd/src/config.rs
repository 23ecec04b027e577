//! Run configuration: a flat document of dotted keys (`kd.T = 4`), loadable
//! from TOML and overridable key by key.

use std::fmt;
use std::path::{Path, PathBuf};

use dfkd_core::divergence::DivergenceKind;
use dfkd_core::schedule::{validate_schedule, AdvSchedule, Fraction, ScheduleWarning};
use dfkd_core::spl::{LambdaSchedule, SpStrategy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DatasetId;
use crate::distill::{AdvCoefficient, DistillConfig, StudentUpdate};
use crate::error::{DfkdError, Result};
use crate::generation::{GeneratorObjective, GeneratorSpec};
use crate::models::Architecture;
use crate::nn::AdamConfig;
use crate::teacher::TeacherTraining;

/// Curriculum distillation or the plain baseline it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdMode {
    Curriculum,
    /// Unweighted KD loss and a constant adversarial coefficient equal to
    /// `adv.lambda_final`.
    Vanilla,
}

/// A fraction in (0, 1) written either as `"a/b"` or as a decimal number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FractionRepr", into = "String")]
pub struct FractionValue(pub Fraction);

#[derive(Deserialize)]
#[serde(untagged)]
enum FractionRepr {
    Text(String),
    Number(f64),
}

impl TryFrom<FractionRepr> for FractionValue {
    type Error = String;

    fn try_from(r: FractionRepr) -> std::result::Result<Self, String> {
        let text = match r {
            FractionRepr::Text(s) => s,
            FractionRepr::Number(v) => v.to_string(),
        };
        text.parse::<Fraction>().map(FractionValue).map_err(|e| e.to_string())
    }
}

impl From<FractionValue> for String {
    fn from(f: FractionValue) -> String {
        f.0.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub dataset: DatasetId,
    pub root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub teacher: Architecture,
    pub student: Architecture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherSection {
    pub epochs: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdSection {
    pub mode: KdMode,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Same setting as `gen.steps_per_epoch`; set at most one of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen_steps: Option<usize>,
    pub student_steps: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplSection {
    pub strategy: SpStrategy,
    pub lambda0: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvSection {
    pub alpha: f64,
    pub k_begin: FractionValue,
    pub k_end: FractionValue,
    pub lambda_final: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSection {
    pub latent_dim: usize,
    pub width: usize,
    pub alpha_bn: f64,
    pub alpha_oh: f64,
    pub divergence: DivergenceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// First epoch of the window used for the stability statistics.
    pub stability_window_start: usize,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub teacher: TeacherSection,
    pub kd: KdSection,
    pub spl: SplSection,
    pub adv: AdvSection,
    pub gen: GenSection,
    pub run: RunSection,
}

pub const DEFAULT_GEN_STEPS: usize = 5;

impl Default for DataSection {
    fn default() -> Self {
        Self { dataset: DatasetId::Mnist, root: PathBuf::from("data") }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { teacher: Architecture::TeacherCnn, student: Architecture::StudentCnn }
    }
}

impl Default for TeacherSection {
    fn default() -> Self {
        Self { epochs: 3.0, batch_size: 128, lr: 1e-3, seed: 0, checkpoint: PathBuf::from("runs/teacher.ckpt") }
    }
}

impl Default for KdSection {
    fn default() -> Self {
        Self {
            mode: KdMode::Curriculum,
            temperature: 4.0,
            epochs: 50,
            batch_size: 256,
            gen_steps: None,
            student_steps: 10,
            lr: 3e-3,
        }
    }
}

impl Default for SplSection {
    fn default() -> Self {
        Self { strategy: SpStrategy::Soft, lambda0: 2.0, rate: 0.02 }
    }
}

impl Default for AdvSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k_begin: FractionValue(Fraction::new(1, 5).expect("valid fraction")),
            k_end: FractionValue(Fraction::new(3, 4).expect("valid fraction")),
            lambda_final: 2.0,
            temperature: 1.0,
        }
    }
}

impl Default for GenSection {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            width: 32,
            alpha_bn: 1.0,
            alpha_oh: 1.0,
            divergence: DivergenceKind::Js,
            steps_per_epoch: None,
            lr: 1e-2,
        }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("runs/distill"), seed: 0, stability_window_start: 10, histogram_bins: 20 }
    }
}

/// Parses `value` as a TOML scalar or array, falling back to a bare string.
pub fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.to_string())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(DfkdError::Config(format!("malformed key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| DfkdError::Config(format!("{key}: {p} is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl RunConfig {
    /// Reads a config file and applies `overrides` (`key=value`) on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| DfkdError::io(p, e))?;
                text.parse::<toml::Table>().map_err(|e| DfkdError::format(p, e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_dotted(&mut table, k, parse_value(v))?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| DfkdError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg.normalized())
    }

    /// Copy with one more `key=value` applied.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut table = self.to_table();
        set_dotted(&mut table, key, parse_value(value))?;
        Self::from_table(table)
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    /// Flat `key = value` document, one dotted key per line, sorted.
    pub fn to_flat_toml(&self) -> String {
        let mut entries = Vec::new();
        flatten("", &self.to_table(), &mut entries);
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::new();
        for (k, v) in entries {
            let key = k.split('.').map(quote_key).collect::<Vec<_>>().join(".");
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }

    /// Short stable digest of the flat document, ignoring `run.out_dir` so a
    /// moved run directory still resumes.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.out_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_flat_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Folds the `gen.steps_per_epoch` alias into `kd.gen_steps`.
    fn normalized(mut self) -> Self {
        self.kd.gen_steps = Some(self.gen_steps());
        self.gen.steps_per_epoch = None;
        self
    }

    pub fn gen_steps(&self) -> usize {
        self.kd.gen_steps.or(self.gen.steps_per_epoch).unwrap_or(DEFAULT_GEN_STEPS)
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(a), Some(b)) = (self.kd.gen_steps, self.gen.steps_per_epoch) {
            if a != b {
                return Err(DfkdError::Config(format!(
                    "kd.gen_steps = {a} and gen.steps_per_epoch = {b} name the same setting; set one"
                )));
            }
        }
        if self.run.histogram_bins == 0 {
            return Err(DfkdError::Config("run.histogram_bins must be positive".into()));
        }
        if !(self.teacher.epochs >= 0.0) || self.teacher.batch_size == 0 {
            return Err(DfkdError::Config("teacher.epochs must be ≥ 0 and teacher.batch_size positive".into()));
        }
        self.distill_config()?.validate()?;
        self.generator_spec()?;
        Ok(())
    }

    pub fn lambda_schedule(&self) -> Result<LambdaSchedule> {
        Ok(LambdaSchedule::new(self.spl.lambda0, self.spl.rate)?)
    }

    pub fn adv_schedule(&self) -> Result<AdvSchedule> {
        Ok(AdvSchedule::new(self.adv.alpha, self.adv.k_begin.0, self.adv.k_end.0, self.kd.epochs as u64, self.adv.lambda_final)?)
    }

    pub fn schedule_warnings(&self) -> Vec<ScheduleWarning> {
        match (self.kd.mode, self.adv_schedule()) {
            (KdMode::Curriculum, Ok(s)) => validate_schedule(&s),
            _ => Vec::new(),
        }
    }

    pub fn distill_config(&self) -> Result<DistillConfig> {
        let (update, adv) = match self.kd.mode {
            KdMode::Curriculum => (
                StudentUpdate::SelfPaced { strategy: self.spl.strategy, lambda: self.lambda_schedule()? },
                AdvCoefficient::Scheduled(self.adv_schedule()?),
            ),
            KdMode::Vanilla => (StudentUpdate::Plain, AdvCoefficient::Constant(self.adv.lambda_final)),
        };
        Ok(DistillConfig {
            temperature: self.kd.temperature,
            epochs: self.kd.epochs,
            gen_steps: self.gen_steps(),
            student_steps: self.kd.student_steps,
            batch_size: self.kd.batch_size,
            update,
            adv,
            objective: GeneratorObjective {
                alpha_bn: self.gen.alpha_bn,
                alpha_oh: self.gen.alpha_oh,
                divergence: self.gen.divergence,
                temperature: self.adv.temperature,
            },
            student_adam: AdamConfig { lr: self.kd.lr, ..AdamConfig::default() },
            generator_adam: AdamConfig { lr: self.gen.lr, ..AdamConfig::default() },
            seed: self.run.seed,
        })
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        let spec = GeneratorSpec {
            latent_dim: self.gen.latent_dim,
            output: self.data.dataset.dims(),
            width: self.gen.width,
            seed: self.run.seed,
        };
        crate::models::generator_layers(spec.latent_dim, spec.output, spec.width)?;
        Ok(spec)
    }

    pub fn teacher_training(&self) -> TeacherTraining {
        TeacherTraining {
            arch: self.model.teacher,
            epochs: self.teacher.epochs,
            batch_size: self.teacher.batch_size,
            adam: AdamConfig { lr: self.teacher.lr, ..AdamConfig::default() },
            seed: self.teacher.seed,
        }
    }
}

fn quote_key(k: &str) -> String {
    if k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        format!("{k:?}")
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_flat_toml())
    }
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| DfkdError::Config(format!("expected key=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

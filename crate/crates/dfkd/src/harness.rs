//! Experiment orchestration: teacher checkpoints, distillation run
//! directories, resumption, sweeps and CSV exports.

use std::fs;
use std::path::{Path, PathBuf};

use dfkd_core::metrics::{histogram, stability_stats, Histogram, StabilityStats};
use dfkd_core::spl::LossVector;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{code_version, RunCheckpoint, TeacherCheckpoint};
use crate::config::RunConfig;
use crate::data::{load, Dataset, Split};
use crate::distill::{EpochReport, Evaluation, Evaluator, RunState, Teacher};
use crate::error::{DfkdError, Result};
use crate::generation::{sample_latent, synthesize};
use crate::nn::{Mode, Network};
use crate::rng::{stream_rng, EXPORT_STREAM, STUDENT_INIT_STREAM};
use crate::teacher::{make_noisy_teacher, make_noisy_teacher_at_accuracy, train_teacher, TeacherReport};

pub const CONFIG_FILE: &str = "config.toml";
pub const EPOCH_LOG: &str = "epochs.csv";
pub const DIFFICULTY_LOG: &str = "difficulty_hist.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const DIVERGED_CHECKPOINT: &str = "diverged.ckpt";
pub const SWEEP_SUMMARY: &str = "sweep_summary.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DfkdError + '_ {
    move |e| DfkdError::io(path, e)
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DfkdError + '_ {
    move |e| DfkdError::format(path, e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| DfkdError::format(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn load_split(cfg: &RunConfig, split: Split) -> Result<Dataset> {
    load(cfg.data.dataset, &cfg.data.root, split)
}

/// Trains the configured teacher and writes it to `teacher.checkpoint`.
pub fn train_teacher_checkpoint(cfg: &RunConfig) -> Result<TeacherCheckpoint> {
    let train = load_split(cfg, Split::Train)?;
    let test = load_split(cfg, Split::Test)?;
    info!("training {} teacher on {} for {} epochs", cfg.model.teacher.as_str(), cfg.data.dataset, cfg.teacher.epochs);
    let (net, report) = train_teacher(&cfg.teacher_training(), &train, &test)?;
    save_teacher(cfg, net, report, &cfg.teacher.checkpoint)
}

/// How far a noisy teacher's training is cut short.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Epochs(f64),
    /// Stop once test accuracy reaches this fraction of the clean teacher's.
    FractionOfClean { fraction: f64, check_every: usize },
}

/// Builds an under-trained teacher and writes it to `output`.
pub fn make_noisy_teacher_checkpoint(cfg: &RunConfig, truncation: Truncation, output: &Path) -> Result<TeacherCheckpoint> {
    let train = load_split(cfg, Split::Train)?;
    let test = load_split(cfg, Split::Test)?;
    let recipe = cfg.teacher_training();
    let (net, report) = match truncation {
        Truncation::Epochs(e) => make_noisy_teacher(&recipe, e, &train, &test)?,
        Truncation::FractionOfClean { fraction, check_every } => {
            let clean = TeacherCheckpoint::load(&cfg.teacher.checkpoint)?;
            let target = fraction * clean.report.test_accuracy;
            info!("truncating teacher training at test accuracy {target:.4}");
            make_noisy_teacher_at_accuracy(&recipe, target, check_every, &train, &test)?
        }
    };
    save_teacher(cfg, net, report, output)
}

fn save_teacher(cfg: &RunConfig, net: Network<f32>, report: TeacherReport, path: &Path) -> Result<TeacherCheckpoint> {
    let ckpt = TeacherCheckpoint {
        dataset: cfg.data.dataset,
        arch: cfg.model.teacher,
        net,
        report,
        config_hash: cfg.hash(),
        code_version: code_version(),
    };
    ckpt.save(path)?;
    info!("teacher saved to {} (test accuracy {:.4})", path.display(), report.test_accuracy);
    Ok(ckpt)
}

/// Loads the configured teacher and checks it matches the dataset and
/// architecture named in the config.
pub fn load_teacher(cfg: &RunConfig) -> Result<TeacherCheckpoint> {
    let ckpt = TeacherCheckpoint::load(&cfg.teacher.checkpoint)?;
    if ckpt.dataset != cfg.data.dataset || ckpt.arch != cfg.model.teacher {
        return Err(DfkdError::Setup(format!(
            "{} holds a {} teacher for {}, config asks for {} on {}",
            cfg.teacher.checkpoint.display(),
            ckpt.arch.as_str(),
            ckpt.dataset,
            cfg.model.teacher.as_str(),
            cfg.data.dataset
        )));
    }
    if ckpt.net.bn_layer_count() == 0 {
        return Err(DfkdError::Setup("teacher has no batch-norm layers to align against".into()));
    }
    Ok(ckpt)
}

/// Freshly initialized student for `cfg`.
pub fn build_student(cfg: &RunConfig) -> Result<Network<f32>> {
    let dims = cfg.data.dataset.dims();
    let mut rng = stream_rng(cfg.run.seed, STUDENT_INIT_STREAM);
    Network::new(&cfg.model.student.layers(dims, cfg.data.dataset.classes()), dims, &mut rng).map_err(DfkdError::Config)
}

/// One row of `epochs.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub acc1: f64,
    pub agree1: f64,
    pub loyalty_mean: f64,
    pub lambda: f64,
    pub alpha_adv: f64,
    pub mean_weight: f64,
    pub mean_difficulty: f64,
    pub gen_adv: f64,
    pub gen_bn: f64,
    pub gen_oh: f64,
    pub kd_weighted: f64,
}

impl From<&EpochReport> for EpochRow {
    fn from(r: &EpochReport) -> Self {
        Self {
            epoch: r.epoch,
            acc1: r.acc1,
            agree1: r.agree1,
            loyalty_mean: r.loyalty_mean,
            lambda: r.lambda,
            alpha_adv: r.alpha_adv,
            mean_weight: r.mean_weight,
            mean_difficulty: r.mean_difficulty,
            gen_adv: r.gen.adv,
            gen_bn: r.gen.bn,
            gen_oh: r.gen.oh,
            kd_weighted: r.kd_weighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub epoch: usize,
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// Final metrics of a run, written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epochs_completed: usize,
    pub epochs_planned: usize,
    pub peak_acc1: f64,
    pub peak_acc1_epoch: usize,
    pub peak_agree1: f64,
    pub peak_loyalty: f64,
    pub final_acc1: f64,
    pub first_epoch_mean_weight: f64,
    pub stability: Option<StabilityStats>,
    pub teacher_accuracy: f64,
    pub teacher_report: TeacherReport,
    pub config_hash: String,
    pub code_version: String,
}

fn summarize(cfg: &RunConfig, log: &[EpochReport], teacher_accuracy: f64, teacher_report: TeacherReport) -> RunSummary {
    let peak = |f: fn(&EpochReport) -> f64| log.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let best = best_epoch(log);
    let acc: Vec<f64> = log.iter().map(|r| r.acc1).collect();
    RunSummary {
        epochs_completed: log.len(),
        epochs_planned: cfg.kd.epochs,
        peak_acc1: peak(|r| r.acc1),
        peak_acc1_epoch: best.map(|r| r.epoch).unwrap_or(0),
        peak_agree1: peak(|r| r.agree1),
        peak_loyalty: peak(|r| r.loyalty_mean),
        final_acc1: log.last().map(|r| r.acc1).unwrap_or(f64::NAN),
        first_epoch_mean_weight: log.first().map(|r| r.mean_weight).unwrap_or(f64::NAN),
        stability: stability_stats(&acc, cfg.run.stability_window_start).ok(),
        teacher_accuracy,
        teacher_report,
        config_hash: cfg.hash(),
        code_version: code_version(),
    }
}

/// First epoch with the highest validation accuracy.
fn best_epoch(log: &[EpochReport]) -> Option<&EpochReport> {
    log.iter().fold(None, |best: Option<&EpochReport>, r| match best {
        Some(b) if b.acc1 >= r.acc1 => Some(b),
        _ => Some(r),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DistillOptions {
    /// Continue from `last.ckpt` if the run directory has one.
    pub resume: bool,
    /// Stop after this many epochs in this invocation.
    pub max_epochs: Option<usize>,
}

fn config_snapshot(cfg: &RunConfig) -> String {
    format!("# code_version = {}\n# config_hash = {}\n{}", code_version(), cfg.hash(), cfg.to_flat_toml())
}

fn write_epoch_log(path: &Path, log: &[EpochReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in log {
        w.serialize(EpochRow::from(r)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_epoch_log(path: &Path) -> Result<Vec<EpochRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

fn read_hist_log(path: &Path) -> Result<Vec<HistRow>> {
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

fn write_hist_log(path: &Path, rows: &[HistRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn hist_rows(epoch: usize, h: &Histogram) -> impl Iterator<Item = HistRow> + '_ {
    h.bins().map(move |(l, r, c)| HistRow { epoch, bin_left: l, bin_right: r, count: c })
}

fn difficulty_hist(losses: &LossVector, bins: usize) -> Result<Histogram> {
    Ok(dfkd_core::metrics::difficulty_histogram(losses, bins)?)
}

/// Runs (or resumes) distillation into `run.out_dir`.
pub fn distill(cfg: &RunConfig, opts: DistillOptions) -> Result<RunSummary> {
    let dir = cfg.run.out_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for w in cfg.schedule_warnings() {
        warn!("{w}");
    }
    let teacher_ckpt = load_teacher(cfg)?;
    let teacher_report = teacher_ckpt.report;
    let test = load_split(cfg, Split::Test)?;
    let mut teacher_net = teacher_ckpt.net;
    let evaluator = Evaluator::new(&mut teacher_net, test);
    let teacher_accuracy = evaluator.teacher_accuracy()?;
    let mut teacher = Teacher::new(teacher_net, teacher_accuracy);

    let last_path = dir.join(LAST_CHECKPOINT);
    let hash = cfg.hash();
    let mut state = if opts.resume && last_path.is_file() {
        let ckpt = RunCheckpoint::load(&last_path)?;
        if ckpt.config_hash != hash {
            return Err(DfkdError::Config(format!(
                "{} was written for config {}, current config is {hash}",
                last_path.display(),
                ckpt.config_hash
            )));
        }
        if ckpt.code_version != code_version() {
            warn!("checkpoint written by {}, running {}", ckpt.code_version, code_version());
        }
        info!("resuming {} at epoch {}", dir.display(), ckpt.state.next_epoch);
        ckpt.state
    } else {
        RunState::new(cfg.distill_config()?, cfg.generator_spec()?, build_student(cfg)?)?
    };

    fs::write(dir.join(CONFIG_FILE), config_snapshot(cfg)).map_err(io_err(&dir))?;
    let save = |state: &RunState, name: &str| {
        RunCheckpoint { state: state.clone(), config_hash: hash.clone(), code_version: code_version() }.save(&dir.join(name))
    };
    let hist_path = dir.join(DIFFICULTY_LOG);
    let mut hist: Vec<HistRow> = read_hist_log(&hist_path)?.into_iter().filter(|r| r.epoch < state.next_epoch).collect();
    if state.next_epoch == 0 {
        hist.clear();
        save(&state, LAST_CHECKPOINT)?;
    }
    write_epoch_log(&dir.join(EPOCH_LOG), &state.log)?;
    write_hist_log(&hist_path, &hist)?;

    let mut best_acc = best_epoch(&state.log).map(|r| r.acc1).unwrap_or(f64::NEG_INFINITY);
    let mut ran = 0;
    while !state.finished() && opts.max_epochs.is_none_or(|m| ran < m) {
        let snapshot = state.clone();
        let outcome = match state.train_epoch(&mut teacher, &evaluator) {
            Ok(o) => o,
            Err(e) => {
                save(&state, DIVERGED_CHECKPOINT)?;
                save(&snapshot, LAST_CHECKPOINT)?;
                return Err(e);
            }
        };
        ran += 1;
        let r = outcome.report;
        info!(
            "epoch {:>3}  acc1 {:.4}  agree1 {:.4}  loyalty {:.4}  λ {:.3}  α_adv {:.3}  w̄ {:.3}",
            r.epoch, r.acc1, r.agree1, r.loyalty_mean, r.lambda, r.alpha_adv, r.mean_weight
        );
        hist.extend(hist_rows(r.epoch, &difficulty_hist(&outcome.last_losses, cfg.run.histogram_bins)?));
        write_epoch_log(&dir.join(EPOCH_LOG), &state.log)?;
        write_hist_log(&hist_path, &hist)?;
        if r.acc1 > best_acc {
            best_acc = r.acc1;
            save(&state, BEST_CHECKPOINT)?;
        }
        save(&state, LAST_CHECKPOINT)?;
    }

    let summary = summarize(cfg, &state.log, teacher_accuracy, teacher_report);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Reads a run directory's config snapshot.
pub fn load_run_config(run_dir: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(Some(&run_dir.join(CONFIG_FILE)), &[])?;
    cfg.run.out_dir = run_dir.to_path_buf();
    Ok(cfg)
}

pub fn read_summary(run_dir: &Path) -> Result<RunSummary> {
    let path = run_dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DfkdError::format(&path, e.to_string()))
}

/// A grid over config keys; points are the Cartesian product in row-major
/// order (last key varies fastest).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    /// Parses `key=v1,v2,...`.
    pub fn push_axis(&mut self, spec: &str) -> Result<()> {
        let (key, values) = crate::config::parse_assignment(spec)?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(DfkdError::Config(format!("grid axis {key} has no values")));
        }
        if self.axes.iter().any(|(k, _)| *k == key) {
            return Err(DfkdError::Config(format!("grid axis {key} given twice")));
        }
        self.axes.push((key, values));
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        self.axes.iter().fold(vec![Vec::new()], |acc, (key, values)| {
            acc.iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((key.clone(), v.clone()));
                        p
                    })
                })
                .collect()
        })
    }
}

/// One row of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub params: Vec<(String, String)>,
    pub run_dir: PathBuf,
    pub outcome: std::result::Result<RunSummary, String>,
}

/// One distillation run per grid point under `base.run.out_dir/point_NNN`.
/// Failed points are recorded and the sweep moves on.
pub fn sweep(base: &RunConfig, grid: &Grid, opts: DistillOptions) -> Result<Vec<SweepRow>> {
    let root = base.run.out_dir.clone();
    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let mut rows = Vec::new();
    for (i, params) in grid.points().into_iter().enumerate() {
        let run_dir = root.join(format!("point_{i:03}"));
        let mut outcome = params.iter().try_fold(base.clone(), |c, (k, v)| c.with_override(k, v)).and_then(|mut cfg| {
            cfg.run.out_dir = run_dir.clone();
            info!("sweep point {i}: {params:?}");
            distill(&cfg, opts)
        });
        if let Err(e) = &outcome {
            warn!("sweep point {i} failed: {e}");
        }
        if let Ok(s) = &outcome {
            if s.epochs_completed < s.epochs_planned {
                outcome = Err(DfkdError::Config(format!("stopped after {} epochs", s.epochs_completed)));
            }
        }
        rows.push(SweepRow { point: i, params, run_dir, outcome: outcome.map_err(|e| e.to_string()) });
        write_sweep_summary(&root.join(SWEEP_SUMMARY), grid, &rows)?;
    }
    Ok(rows)
}

fn write_sweep_summary(path: &Path, grid: &Grid, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<String> = vec!["point".into(), "status".into()];
    header.extend(grid.axes.iter().map(|(k, _)| k.clone()));
    header.extend(
        ["peak_acc1", "peak_acc1_epoch", "peak_agree1", "peak_loyalty", "final_acc1", "first_epoch_mean_weight", "stability_mean", "stability_variance", "run_dir", "error"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err(path))?;
    for row in rows {
        let mut rec = vec![row.point.to_string()];
        rec.push(if row.outcome.is_ok() { "ok" } else { "failed" }.to_string());
        rec.extend(row.params.iter().map(|(_, v)| v.clone()));
        match &row.outcome {
            Ok(s) => {
                let (mu, var) = s.stability.map(|st| (st.mean.to_string(), st.variance.to_string())).unwrap_or_default();
                rec.extend([
                    s.peak_acc1.to_string(),
                    s.peak_acc1_epoch.to_string(),
                    s.peak_agree1.to_string(),
                    s.peak_loyalty.to_string(),
                    s.final_acc1.to_string(),
                    s.first_epoch_mean_weight.to_string(),
                    mu,
                    var,
                    row.run_dir.display().to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(row.run_dir.display().to_string());
                rec.push(e.clone());
            }
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Which checkpoint of a run directory to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Best,
    Last,
}

impl Which {
    fn file(self) -> &'static str {
        match self {
            Which::Best => BEST_CHECKPOINT,
            Which::Last => LAST_CHECKPOINT,
        }
    }
}

/// Validation metrics of a run's student, plus the checkpoint they came from.
pub fn evaluate_run(run_dir: &Path, which: Which) -> Result<(RunCheckpoint, Evaluation)> {
    let cfg = load_run_config(run_dir)?;
    let path = run_dir.join(which.file());
    let mut ckpt = RunCheckpoint::load(&path)?;
    let mut teacher = load_teacher(&cfg)?.net;
    let evaluator = Evaluator::new(&mut teacher, load_split(&cfg, Split::Test)?);
    let eval = evaluator.evaluate(&mut ckpt.state.student)?;
    Ok((ckpt, eval))
}

/// Writes plot-ready CSVs into `run_dir/plots`: the loyalty distribution of
/// the best student, one difficulty histogram per epoch, and a batch of raw
/// generated samples. Returns the files written.
pub fn export_plots(run_dir: &Path, bins: usize, samples: usize) -> Result<Vec<PathBuf>> {
    let out = run_dir.join("plots");
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut written = Vec::new();

    let (mut ckpt, eval) = evaluate_run(run_dir, Which::Best)?;
    let loyalty = histogram(&eval.loyalty, bins, 1.0)?;
    let path = out.join("loyalty_hist.csv");
    write_bins(&path, &loyalty)?;
    written.push(path);

    let rows = read_hist_log(&run_dir.join(DIFFICULTY_LOG))?;
    let mut epochs: Vec<usize> = rows.iter().map(|r| r.epoch).collect();
    epochs.dedup();
    for epoch in epochs {
        let path = out.join(format!("difficulty_epoch_{epoch:03}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        for r in rows.iter().filter(|r| r.epoch == epoch) {
            w.serialize(BinRow { bin_left: r.bin_left, bin_right: r.bin_right, count: r.count }).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }

    if samples > 0 {
        let cfg = load_run_config(run_dir)?;
        let generator = &mut ckpt.state.generator;
        let z = sample_latent(&mut stream_rng(cfg.run.seed, EXPORT_STREAM), samples, generator.spec.latent_dim);
        let x = synthesize(&mut generator.net, &z, Mode::BatchStats)?;
        let path = out.join("samples.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        let mut header = vec!["sample".to_string()];
        header.extend((0..x.features()).map(|j| format!("x{j}")));
        w.write_record(&header).map_err(csv_err(&path))?;
        for i in 0..x.n {
            let mut rec = vec![i.to_string()];
            rec.extend(x.sample(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn write_bins(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for (l, r, c) in h.bins() {
        w.serialize(BinRow { bin_left: l, bin_right: r, count: c }).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_the_cartesian_product() {
        let mut g = Grid::default();
        g.push_axis("adv.k_begin=1/5,1/4,1/3").unwrap();
        g.push_axis("adv.k_end=2/3, 3/4, 4/5").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[1], vec![("adv.k_begin".to_string(), "1/5".to_string()), ("adv.k_end".to_string(), "3/4".to_string())]);
        assert!(g.push_axis("adv.k_end=1/2").is_err());
        assert!(g.push_axis("kd.T=").is_err());
        assert_eq!(Grid::default().points(), vec![Vec::new()]);
    }

    fn report(epoch: usize, acc1: f64) -> EpochReport {
        EpochReport {
            epoch,
            acc1,
            agree1: acc1,
            loyalty_mean: 0.5,
            lambda: 1.0,
            alpha_adv: 0.0,
            mean_weight: 0.5,
            mean_difficulty: 0.1,
            gen: Default::default(),
            kd_weighted: 0.0,
        }
    }

    #[test]
    fn best_epoch_prefers_the_first_peak() {
        let log = [report(0, 0.5), report(1, 0.9), report(2, 0.9), report(3, 0.7)];
        assert_eq!(best_epoch(&log).unwrap().epoch, 1);
        assert!(best_epoch(&[]).is_none());
    }
}

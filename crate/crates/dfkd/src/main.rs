use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dfkd::config::RunConfig;
use dfkd::error::{DfkdError, Result};
use dfkd::harness::{self, DistillOptions, Grid, Truncation, Which};

/// Data-free knowledge distillation with a self-paced curriculum.
///
/// Any config key can be overridden on the command line as a dotted flag,
/// e.g. `--kd.T=10` or `--spl.strategy log`.
#[derive(Parser, Debug)]
#[command(name = "dfkd", version = env!("CARGO_PKG_VERSION"))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Flat TOML config file; defaults apply to missing keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the teacher on real data and write `teacher.checkpoint`.
    TrainTeacher(ConfigArgs),
    /// Train a deliberately under-trained teacher.
    MakeNoisyTeacher {
        #[command(flatten)]
        config: ConfigArgs,
        /// Stop after this many (possibly fractional) epochs.
        #[arg(long, conflicts_with = "fraction", required_unless_present = "fraction")]
        truncation_epochs: Option<f64>,
        /// Stop once test accuracy reaches this fraction of the clean teacher's.
        #[arg(long)]
        fraction: Option<f64>,
        /// Steps between accuracy checks when using `--fraction`.
        #[arg(long, default_value_t = 10)]
        check_every: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run distillation into `run.out_dir`.
    Distill {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue from the run directory's last checkpoint.
        #[arg(long)]
        resume: bool,
        /// Stop after this many epochs in this invocation.
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// One distillation run per point of a grid over config keys.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Axis as `key=v1,v2,...`; repeat for a product grid.
        #[arg(long = "grid", required = true)]
        axes: Vec<String>,
        #[arg(long)]
        resume: bool,
    },
    /// Validation metrics of a run's student, as JSON.
    Evaluate {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Checkpoint::Best)]
        checkpoint: Checkpoint,
    },
    /// Write plot-ready histogram CSVs for a run.
    ExportPlots {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Number of generated samples to dump.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Print the effective config as a flat TOML document.
    ShowConfig(ConfigArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Checkpoint {
    Best,
    Last,
}

/// Splits dotted `--section.key=value` / `--section.key value` flags out of
/// the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let key = flag.split('=').next().unwrap_or_default();
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match flag.split_once('=') {
            Some((_, v)) => v.to_string(),
            None => it.next().ok_or_else(|| DfkdError::Config(format!("--{key} needs a value")))?,
        };
        overrides.push((key.to_string(), value));
    }
    Ok((rest, overrides))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run() -> Result<()> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    let load = |c: &ConfigArgs| RunConfig::load(c.config.as_deref(), &overrides);
    let needs_no_overrides = matches!(cli.command, Command::Evaluate { .. } | Command::ExportPlots { .. });
    if needs_no_overrides && !overrides.is_empty() {
        return Err(DfkdError::Config("this command reads its config from the run directory".into()));
    }

    match &cli.command {
        Command::TrainTeacher(c) => {
            let ckpt = harness::train_teacher_checkpoint(&load(c)?)?;
            print_json(&ckpt.report);
        }
        Command::MakeNoisyTeacher { config, truncation_epochs, fraction, check_every, output } => {
            let truncation = match (truncation_epochs, fraction) {
                (Some(e), _) => Truncation::Epochs(*e),
                (None, Some(f)) => Truncation::FractionOfClean { fraction: *f, check_every: *check_every },
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let ckpt = harness::make_noisy_teacher_checkpoint(&load(config)?, truncation, output)?;
            print_json(&ckpt.report);
        }
        Command::Distill { config, resume, max_epochs } => {
            let summary = harness::distill(&load(config)?, DistillOptions { resume: *resume, max_epochs: *max_epochs })?;
            print_json(&summary);
        }
        Command::Sweep { config, axes, resume } => {
            let cfg = load(config)?;
            let mut grid = Grid::default();
            for a in axes {
                grid.push_axis(a)?;
            }
            let rows = harness::sweep(&cfg, &grid, DistillOptions { resume: *resume, max_epochs: None })?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!(
                "{} points, {failed} failed; summary in {}",
                rows.len(),
                cfg.run.out_dir.join(harness::SWEEP_SUMMARY).display()
            );
        }
        Command::Evaluate { run_dir, checkpoint } => {
            let which = match checkpoint {
                Checkpoint::Best => Which::Best,
                Checkpoint::Last => Which::Last,
            };
            let (ckpt, eval) = harness::evaluate_run(run_dir, which)?;
            print_json(&serde_json::json!({
                "epochs_trained": ckpt.state.next_epoch,
                "acc1": eval.acc1,
                "agree1": eval.agree1,
                "loyalty_mean": eval.loyalty_mean,
            }));
        }
        Command::ExportPlots { run_dir, bins, samples } => {
            for path in harness::export_plots(run_dir, *bins, *samples)? {
                println!("{}", path.display());
            }
        }
        Command::ShowConfig(c) => print!("{}", load(c)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

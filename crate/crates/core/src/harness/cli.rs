use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::checkpoint::{load_checkpoint, Checkpoint};
use super::config::{ConfigBuilder, ExperimentConfig};
use super::runs::{run_evaluate, run_sample, run_training, run_transfer, write_run, write_transfer, CHECKPOINT_FILE};
use super::studies::{architecture_study, convergence_study, write_architecture_study, write_convergence_study};
use super::verify::verify;
use crate::error::PinnError;
use crate::training::TrainStatus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "thermopinn", version, about = "PINN training and convergence studies for Boussinesq flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one network and write checkpoint, metrics and error report.
    Train(CommonArgs),
    /// Error report of a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Threshold ladder × dataset ladder sweep with log-log fits.
    ConvergenceStudy(CommonArgs),
    /// Architecture × dataset sweep of epochs to threshold.
    ArchitectureStudy(CommonArgs),
    /// Warm-start a checkpoint on a new domain or flow.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target preset, e.g. half-domain or re10.
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write the nested collocation datasets as CSV.
    Sample(CommonArgs),
    /// Check the manufactured solution and the derivative code.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration value, e.g. `train.threshold=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "true|false")]
    augmented: Option<bool>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Start from the long-running paper-scale preset.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<PinnError> for Failure {
    fn from(e: PinnError) -> Self {
        match e {
            PinnError::NumericalOverflow { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn resolve(common: &CommonArgs, base: Option<ConfigBuilder>) -> Result<ExperimentConfig, Failure> {
    let mut b = match base {
        Some(b) => b,
        None if common.paper_scale => {
            eprintln!("warning: the paper-scale preset trains for up to 350000 epochs and can take many CPU-hours");
            ConfigBuilder::new("paper")?
        }
        None => ConfigBuilder::new("desk")?,
    };
    if let Some(path) = &common.config {
        b = b.merge_file(path)?;
    }
    for s in &common.set {
        b = b.set(s)?;
    }
    if let Some(seed) = common.seed {
        b = b.set_value("train.seed", seed.into())?;
    }
    if let Some(a) = common.augmented {
        b = b.set_value("train.augmented", a.into())?;
    }
    if let Some(out) = &common.out {
        b = b.set_value("output_dir", out.to_string_lossy().into_owned().into())?;
    }
    Ok(b.build()?)
}

fn status_exit(status: TrainStatus) -> Result<(), Failure> {
    match status {
        TrainStatus::Diverged | TrainStatus::Stalled => Err(Failure::Numerical(format!("training stopped: {status:?}"))),
        _ => Ok(()),
    }
}

fn progress(line: &str) {
    eprintln!("{line}");
}

fn open_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Ok(load_checkpoint(path)?)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(common) => {
            let config = resolve(&common, None)?;
            let outcome = run_training(&config)?;
            write_run(&config, &outcome, &config.output_dir, "", common.plots)?;
            println!(
                "{:?} after {} epochs, final residual {}; wrote {}",
                outcome.history.status,
                outcome.history.epochs_used,
                outcome.history.final_total().unwrap_or(f64::NAN),
                config.output_dir.join(CHECKPOINT_FILE).display()
            );
            status_exit(outcome.history.status)
        }
        Command::Evaluate { checkpoint, common } => {
            let ck = open_checkpoint(&checkpoint)?;
            let base = if common.config.is_some() || common.paper_scale {
                None
            } else {
                Some(ConfigBuilder::from_config(&ck.config)?)
            };
            let mut config = resolve(&common, base)?;
            if common.out.is_none() && common.config.is_none() {
                config.output_dir = checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
            }
            let report = run_evaluate(&config, &ck, &config.output_dir)?;
            for (name, f) in crate::evaluation::FIELD_NAMES.iter().zip(report.fields()) {
                println!("{name:>5}: W0 {:e}  W1 {:e}  W2 {:e}  L2 {:e}", f.w0_inf, f.w1_inf, f.w2_inf, f.l2);
            }
            Ok(())
        }
        Command::ConvergenceStudy(common) => {
            let config = resolve(&common, None)?;
            let study = convergence_study(&config, &mut |l| progress(l))?;
            write_convergence_study(&config, &study, &config.output_dir, common.plots)?;
            println!(
                "{} cells, {} fits; wrote {}",
                study.cells.len(),
                study.fits.len(),
                config.output_dir.display()
            );
            Ok(())
        }
        Command::ArchitectureStudy(common) => {
            let config = resolve(&common, None)?;
            let cells = architecture_study(&config, &mut |l| progress(l))?;
            write_architecture_study(&config, &cells, &config.output_dir)?;
            println!("{} cells; wrote {}", cells.len(), config.output_dir.display());
            Ok(())
        }
        Command::Transfer {
            checkpoint,
            preset,
            common,
        } => {
            let ck = open_checkpoint(&checkpoint)?;
            let mut base = ConfigBuilder::new(preset.as_deref().unwrap_or("desk"))?;
            // The source network carries over unless the target names another.
            base = base.set_value("architecture", ck.architecture.to_string().into())?;
            let config = resolve(&common, Some(base))?;
            let outcome = run_transfer(&config, &ck)?;
            write_transfer(&config, &ck, &outcome, &config.output_dir, common.plots)?;
            let warm = &outcome.warm.history;
            print!("warm start: {:?} after {} epochs", warm.status, warm.epochs_used);
            if let Some(cold) = &outcome.cold {
                print!("; cold start: {:?} after {} epochs", cold.history.status, cold.history.epochs_used);
            }
            println!();
            status_exit(warm.status)
        }
        Command::Sample(common) => {
            let config = resolve(&common, None)?;
            let sets = run_sample(&config, &config.output_dir)?;
            for s in &sets {
                println!("level {}: {} points", s.level, s.total());
            }
            Ok(())
        }
        Command::Verify(common) => {
            let config = resolve(&common, None)?;
            let checks = verify(config.train.seed)?;
            let mut ok = true;
            for c in &checks {
                println!(
                    "{} {}: {:e} (tolerance {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
                ok &= c.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Failure::Numerical("verification failed".into()))
            }
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            EXIT_NUMERICAL
        }
    }
}

use std::path::Path;

use serde::Serialize;

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::config::ExperimentConfig;
use super::outputs::{ensure_dir, save_error_field_csv, save_json, save_metrics_csv, RunSummary};
use super::plots::{Plot, Scale, Series};
use crate::error::{PinnError, Result};
use crate::evaluation::{error_field, error_report, generalization_on_grid, ErrorReport};
use crate::net::{init_parameters, Architecture, ParameterVector};
use crate::physics::Beltrami;
use crate::sampling::{hierarchical_datasets, save_collocation_csv, test_grid, CollocationSet};
use crate::training::{transfer_learn, TrainStatus, Trainer, TrainingHistory};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "error_report.json";
pub const ERROR_FIELD_FILE: &str = "error_field.csv";

/// The nested datasets of a configuration, generated from its seed.
pub fn datasets(config: &ExperimentConfig) -> Result<Vec<CollocationSet>> {
    hierarchical_datasets(config.levels, &config.domain, config.train.seed, &Beltrami)
}

pub fn training_set(config: &ExperimentConfig) -> Result<CollocationSet> {
    let mut sets = datasets(config)?;
    Ok(sets.swap_remove(config.train_level))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterVector,
    pub history: TrainingHistory,
    pub report: ErrorReport,
    pub generalization_error: f64,
    pub checkpoint: Checkpoint,
}

/// Train from a fresh initialization seeded by `config.train.seed`.
pub fn run_training(config: &ExperimentConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if config.train.max_epochs == 0 {
        return Err(PinnError::Config("max_epochs must be at least 1".into()));
    }
    let set = training_set(config)?;
    let init = init_parameters(&config.architecture, config.train.seed);
    let mut trainer = Trainer::new(&config.architecture, &init, &set, config.flow, &Beltrami, config.train)?;
    let status = trainer.run_until(config.train.threshold, config.train.max_epochs);
    let history = trainer.history(status);
    let params = trainer.params();
    let checkpoint = Checkpoint::new(config, params.clone(), trainer.adam_state().cloned(), status);
    finish(config, params, history, checkpoint)
}

fn finish(
    config: &ExperimentConfig,
    params: ParameterVector,
    history: TrainingHistory,
    checkpoint: Checkpoint,
) -> Result<TrainOutcome> {
    let report = error_report(&config.architecture, &params, &config.domain, config.grid_points, &Beltrami)?;
    let generalization_error = generalization_on_grid(
        &config.architecture,
        &params,
        &config.domain,
        config.grid_points,
        config.flow,
        &Beltrami,
    )?;
    Ok(TrainOutcome {
        params,
        history,
        report,
        generalization_error,
        checkpoint,
    })
}

/// Checkpoint, metrics, error report, error field and optional plots.
pub fn write_run(config: &ExperimentConfig, outcome: &TrainOutcome, dir: &Path, prefix: &str, plots: bool) -> Result<()> {
    ensure_dir(dir)?;
    let name = |base: &str| dir.join(format!("{prefix}{base}"));
    save_checkpoint(&name(CHECKPOINT_FILE), &outcome.checkpoint)?;
    save_metrics_csv(&name(METRICS_FILE), config, &outcome.history.records)?;
    save_json(
        &name(REPORT_FILE),
        &RunSummary::new(config, &outcome.history, &outcome.report, Some(outcome.generalization_error)),
    )?;
    write_error_field(config, &config.architecture, &outcome.params, &name(ERROR_FIELD_FILE))?;
    if plots {
        residual_plot(&outcome.history).save(&name("residuals.svg"))?;
    }
    Ok(())
}

pub fn write_error_field(
    config: &ExperimentConfig,
    arch: &Architecture,
    params: &ParameterVector,
    path: &Path,
) -> Result<()> {
    let grid = test_grid(&config.domain, config.grid_points)?;
    let errors = error_field(arch, params, &grid, &Beltrami)?;
    save_error_field_csv(path, config, &grid, &errors)
}

/// Domain, boundary, augmentation and total residual against epoch.
pub fn residual_plot(history: &TrainingHistory) -> Plot {
    let series = |label: &str, f: &dyn Fn(&crate::training::EpochRecord) -> Option<f64>| Series {
        label: label.into(),
        points: history
            .records
            .iter()
            .filter_map(|r| f(r).map(|v| (r.epoch as f64, v)))
            .collect(),
    };
    let mut all = vec![
        series("domain", &|r| Some(r.breakdown.r_domain)),
        series("boundary", &|r| Some(r.breakdown.r_boundary)),
        series("total", &|r| Some(r.breakdown.r_total)),
    ];
    if history.records.iter().any(|r| r.breakdown.r_augm.is_some()) {
        all.insert(2, series("augmentation", &|r| r.breakdown.r_augm));
    }
    Plot {
        title: "Training residual".into(),
        x_label: "epoch".into(),
        y_label: "mean squared residual".into(),
        x_scale: Scale::Linear,
        y_scale: Scale::Log,
        series: all,
    }
}

/// Error report of stored parameters under `config`.
pub fn run_evaluate(config: &ExperimentConfig, checkpoint: &Checkpoint, dir: &Path) -> Result<ErrorReport> {
    let arch = &checkpoint.architecture;
    let params = &checkpoint.parameters;
    let report = error_report(arch, params, &config.domain, config.grid_points, &Beltrami)?;
    let generalization_error =
        generalization_on_grid(arch, params, &config.domain, config.grid_points, config.flow, &Beltrami)?;
    ensure_dir(dir)?;
    save_json(
        &dir.join(REPORT_FILE),
        &EvaluateSummary {
            config,
            seed: checkpoint.seed,
            architecture: arch,
            status: checkpoint.status,
            generalization_error,
            errors: &report,
        },
    )?;
    write_error_field(config, arch, params, &dir.join(ERROR_FIELD_FILE))?;
    Ok(report)
}

#[derive(Serialize)]
struct EvaluateSummary<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    architecture: &'a Architecture,
    status: TrainStatus,
    generalization_error: f64,
    errors: &'a ErrorReport,
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub warm: TrainOutcome,
    pub cold: Option<TrainOutcome>,
}

impl TransferOutcome {
    /// Warm-start epochs over cold-start epochs.
    pub fn epoch_ratio(&self) -> Option<f64> {
        let cold = self.cold.as_ref()?;
        Some(self.warm.history.epochs_used as f64 / cold.history.epochs_used as f64)
    }
}

/// Continue training `checkpoint` under the target `config`, and optionally
/// train the same target from scratch for comparison.
pub fn run_transfer(config: &ExperimentConfig, checkpoint: &Checkpoint) -> Result<TransferOutcome> {
    config.validate()?;
    let set = training_set(config)?;
    let (params, history) = transfer_learn(
        &checkpoint.architecture,
        &checkpoint.parameters,
        &config.architecture,
        &set,
        config.flow,
        &Beltrami,
        &config.train,
    )?;
    let ck = Checkpoint::new(config, params.clone(), None, history.status);
    let warm = finish(config, params, history, ck)?;
    let cold = if config.transfer.cold_baseline && config.train.max_epochs > 0 {
        Some(run_training(config)?)
    } else {
        None
    };
    Ok(TransferOutcome { warm, cold })
}

#[derive(Serialize)]
struct TransferSummary<'a> {
    config: &'a ExperimentConfig,
    source_config: &'a ExperimentConfig,
    seed: u64,
    warm: RunSummary<'a>,
    cold: Option<RunSummary<'a>>,
    epoch_ratio: Option<f64>,
}

pub fn write_transfer(
    config: &ExperimentConfig,
    source: &Checkpoint,
    outcome: &TransferOutcome,
    dir: &Path,
    plots: bool,
) -> Result<()> {
    write_run(config, &outcome.warm, dir, "warm_", plots)?;
    if let Some(cold) = &outcome.cold {
        write_run(config, cold, dir, "cold_", plots)?;
    }
    let summary = TransferSummary {
        config,
        source_config: &source.config,
        seed: config.train.seed,
        warm: RunSummary::new(
            config,
            &outcome.warm.history,
            &outcome.warm.report,
            Some(outcome.warm.generalization_error),
        ),
        cold: outcome
            .cold
            .as_ref()
            .map(|c| RunSummary::new(config, &c.history, &c.report, Some(c.generalization_error))),
        epoch_ratio: outcome.epoch_ratio(),
    };
    save_json(&dir.join("transfer_summary.json"), &summary)
}

/// Write every dataset level as `collocation_level{k}.csv`.
pub fn run_sample(config: &ExperimentConfig, dir: &Path) -> Result<Vec<CollocationSet>> {
    config.validate()?;
    let sets = datasets(config)?;
    ensure_dir(dir)?;
    for set in &sets {
        save_collocation_csv(set, &dir.join(format!("collocation_level{}.csv", set.level)))?;
    }
    Ok(sets)
}

//! Files written by the command-line runs. Every file carries the resolved
//! configuration: CSVs in a leading `#` line, JSON in a `config` member.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{PinnError, Result};
use crate::evaluation::ErrorReport;
use crate::physics::ResidualBreakdown;
use crate::training::{EpochRecord, TrainStatus, TrainingHistory};
use crate::autodiff::Point2;

pub const METRICS_COLUMNS: [&str; 13] = [
    "epoch",
    "r_u",
    "r_v",
    "r_div",
    "r_theta",
    "r_boundary_total",
    "r_p",
    "r_div_x",
    "r_div_y",
    "r_domain",
    "r_augm",
    "r_total",
    "validation_total",
];

pub const ERROR_FIELD_COLUMNS: [&str; 6] = ["x", "y", "err_u", "err_v", "err_p", "err_theta"];

pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub(crate) fn provenance_line(config: &ExperimentConfig) -> String {
    format!("# config={}", config.to_json_line())
}

fn metrics_row(r: &EpochRecord) -> [String; 13] {
    let b: &ResidualBreakdown = &r.breakdown;
    let a = b.augmentation;
    [
        r.epoch.to_string(),
        num(b.r_u),
        num(b.r_v),
        num(b.r_div),
        num(b.r_theta),
        num(b.r_boundary),
        opt(a.map(|a| a.r_p)),
        opt(a.map(|a| a.r_div_x)),
        opt(a.map(|a| a.r_div_y)),
        num(b.r_domain),
        opt(b.r_augm),
        num(b.r_total),
        opt(r.validation_total),
    ]
}

/// Per-epoch residual decomposition. Augmentation columns are empty for
/// bare runs.
pub fn write_metrics_csv<W: Write>(config: &ExperimentConfig, records: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", provenance_line(config)).map_err(|e| PinnError::io("<metrics>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for r in records {
        w.write_record(metrics_row(r))?;
    }
    w.flush().map_err(|e| PinnError::io("<metrics>", e))?;
    Ok(())
}

pub fn save_metrics_csv(path: &Path, config: &ExperimentConfig, records: &[EpochRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| PinnError::io(path, e))?;
    write_metrics_csv(config, records, std::io::BufWriter::new(file))
}

/// Pointwise absolute errors on the evaluation grid.
pub fn save_error_field_csv(
    path: &Path,
    config: &ExperimentConfig,
    grid: &[Point2],
    errors: &[[f64; 4]],
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| PinnError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", provenance_line(config)).map_err(|e| PinnError::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ERROR_FIELD_COLUMNS)?;
    for (p, e) in grid.iter().zip(errors) {
        w.write_record([num(p.x), num(p.y), num(e[0]), num(e[1]), num(e[2]), num(e[3])])?;
    }
    w.flush().map_err(|e| PinnError::io(path, e))?;
    Ok(())
}

/// Summary written next to the checkpoint of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a ExperimentConfig,
    pub seed: u64,
    pub status: TrainStatus,
    pub epochs_used: usize,
    pub evaluations: usize,
    pub final_total: Option<f64>,
    pub generalization_error: Option<f64>,
    pub errors: &'a ErrorReport,
}

impl<'a> RunSummary<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        history: &TrainingHistory,
        errors: &'a ErrorReport,
        generalization_error: Option<f64>,
    ) -> Self {
        RunSummary {
            config,
            seed: config.train.seed,
            status: history.status,
            epochs_used: history.epochs_used,
            evaluations: history.evaluations,
            final_total: history.final_total(),
            generalization_error,
            errors,
        }
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| PinnError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| PinnError::io(path, e))
}

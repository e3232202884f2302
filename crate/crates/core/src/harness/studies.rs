//! Parameter sweeps: threshold × dataset convergence tables and the
//! architecture × dataset heatmap.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::outputs::{ensure_dir, num, provenance_line, save_json};
use super::plots::{Plot, Scale, Series};
use crate::error::{PinnError, Result};
use crate::evaluation::{error_report, fit_convergence, AbscissaKind, ConvergenceFit, ErrorReport, FIELD_NAMES};
use crate::net::{init_parameters, Architecture};
use crate::physics::Beltrami;
use crate::training::{train, train_ladder, TrainStatus};

use super::runs::datasets;

pub const NORM_NAMES: [&str; 4] = ["w0", "w1", "w2", "l2"];

/// One (dataset level, threshold) cell of the convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyCell {
    pub level: usize,
    pub points: usize,
    pub threshold: f64,
    pub status: TrainStatus,
    pub epochs: usize,
    /// Logged total residual when the cell stopped.
    pub training_error: Option<f64>,
    /// Absent when training diverged.
    pub errors: Option<ErrorReport>,
}

impl StudyCell {
    pub fn converged(&self) -> bool {
        self.status.converged()
    }

    /// Error of `field` (index into [`FIELD_NAMES`]) in `norm` (index into
    /// [`NORM_NAMES`]).
    pub fn error(&self, field: usize, norm: usize) -> Option<f64> {
        let f = self.errors.as_ref()?.fields()[field];
        Some(match norm {
            0 => f.w0_inf,
            1 => f.w1_inf,
            2 => f.w2_inf,
            _ => f.l2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub field: &'static str,
    pub norm: &'static str,
    /// Dataset level held fixed, for fits against training error.
    pub level: Option<usize>,
    /// Threshold held fixed, for fits against collocation count.
    pub threshold: Option<f64>,
    pub fit: ConvergenceFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub cells: Vec<StudyCell>,
    pub fits: Vec<FitRecord>,
}

/// Train every dataset level through the threshold ladder. Each level is
/// one continued run, so tighter thresholds reuse the looser snapshots.
pub fn convergence_study(config: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<ConvergenceStudy> {
    config.validate()?;
    if config.train.max_epochs == 0 {
        return Err(PinnError::Config("max_epochs must be at least 1".into()));
    }
    let arch = &config.architecture;
    let init = init_parameters(arch, config.train.seed);
    let mut cells = Vec::new();
    for set in datasets(config)? {
        let points = set.total();
        let outcome = train_ladder(arch, &init, &set, config.flow, &Beltrami, &config.train, &config.thresholds);
        match outcome {
            Ok((snaps, _)) => {
                for s in snaps {
                    let errors = if s.status == TrainStatus::Diverged {
                        None
                    } else {
                        error_report(arch, &s.params, &config.domain, config.grid_points, &Beltrami).ok()
                    };
                    progress(&format!(
                        "level {} ({points} points) threshold {:e}: {:?} after {} epochs",
                        set.level, s.threshold, s.status, s.epochs
                    ));
                    cells.push(StudyCell {
                        level: set.level,
                        points,
                        threshold: s.threshold,
                        status: s.status,
                        epochs: s.epochs,
                        training_error: s.final_breakdown.map(|b| b.r_total),
                        errors,
                    });
                }
            }
            Err(e) => {
                progress(&format!("level {} failed: {e}", set.level));
                for &t in &config.thresholds {
                    cells.push(StudyCell {
                        level: set.level,
                        points,
                        threshold: t,
                        status: TrainStatus::Diverged,
                        epochs: 0,
                        training_error: None,
                        errors: None,
                    });
                }
            }
        }
    }
    let fits = fit_cells(&cells);
    Ok(ConvergenceStudy { cells, fits })
}

/// Log-log fits over converged cells: error against training error at each
/// level, and error against collocation count at each threshold.
pub fn fit_cells(cells: &[StudyCell]) -> Vec<FitRecord> {
    let mut levels: Vec<usize> = cells.iter().map(|c| c.level).collect();
    levels.dedup();
    let mut thresholds: Vec<f64> = Vec::new();
    for c in cells {
        if !thresholds.contains(&c.threshold) {
            thresholds.push(c.threshold);
        }
    }
    let mut out = Vec::new();
    for (fi, field) in FIELD_NAMES.iter().enumerate() {
        for (ni, norm) in NORM_NAMES.iter().enumerate() {
            for &level in &levels {
                let pts: Vec<(f64, f64)> = cells
                    .iter()
                    .filter(|c| c.level == level && c.converged())
                    .filter_map(|c| Some((c.training_error?, c.error(fi, ni)?)))
                    .collect();
                if let Ok(fit) = fit_convergence(&pts, AbscissaKind::TrainingError) {
                    out.push(FitRecord {
                        field,
                        norm,
                        level: Some(level),
                        threshold: None,
                        fit,
                    });
                }
            }
            for &threshold in &thresholds {
                let pts: Vec<(f64, f64)> = cells
                    .iter()
                    .filter(|c| c.threshold == threshold && c.converged())
                    .filter_map(|c| Some((c.points as f64, c.error(fi, ni)?)))
                    .collect();
                if let Ok(fit) = fit_convergence(&pts, AbscissaKind::CollocationCount) {
                    out.push(FitRecord {
                        field,
                        norm,
                        level: None,
                        threshold: Some(threshold),
                        fit,
                    });
                }
            }
        }
    }
    out
}

pub fn write_convergence_study(
    config: &ExperimentConfig,
    study: &ConvergenceStudy,
    dir: &Path,
    plots: bool,
) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join("convergence_table.csv");
    let file = std::fs::File::create(&path).map_err(|e| PinnError::io(&path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", provenance_line(config)).map_err(|e| PinnError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["level", "points", "threshold", "status", "epochs", "training_error"]
        .map(String::from)
        .to_vec();
    for f in FIELD_NAMES {
        for n in NORM_NAMES {
            header.push(format!("{f}_{n}"));
        }
    }
    w.write_record(&header)?;
    for c in &study.cells {
        let mut row = vec![
            c.level.to_string(),
            c.points.to_string(),
            num(c.threshold),
            format!("{:?}", c.status),
            c.epochs.to_string(),
            c.training_error.map(num).unwrap_or_default(),
        ];
        for fi in 0..4 {
            for ni in 0..4 {
                row.push(c.error(fi, ni).map(num).unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| PinnError::io(&path, e))?;

    #[derive(Serialize)]
    struct Fits<'a> {
        config: &'a ExperimentConfig,
        seed: u64,
        fits: &'a [FitRecord],
    }
    save_json(
        &dir.join("fits.json"),
        &Fits {
            config,
            seed: config.train.seed,
            fits: &study.fits,
        },
    )?;

    if plots {
        for (fi, field) in FIELD_NAMES.iter().enumerate() {
            let mut levels: Vec<usize> = study.cells.iter().map(|c| c.level).collect();
            levels.dedup();
            let series = levels
                .iter()
                .map(|&level| Series {
                    label: format!("{} pts", study.cells.iter().find(|c| c.level == level).map_or(0, |c| c.points)),
                    points: study
                        .cells
                        .iter()
                        .filter(|c| c.level == level && c.converged())
                        .filter_map(|c| Some((c.training_error?, c.error(fi, 0)?)))
                        .collect(),
                })
                .collect();
            Plot {
                title: format!("W0,inf error of {field}"),
                x_label: "training error".into(),
                y_label: "error".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                series,
            }
            .save(&dir.join(format!("convergence_{field}.svg")))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchitectureCell {
    pub architecture: Architecture,
    pub level: usize,
    pub points: usize,
    pub status: TrainStatus,
    pub epochs: usize,
}

impl ArchitectureCell {
    /// Heatmap entry: epochs to threshold, or `N.C.`.
    pub fn label(&self) -> String {
        if self.status.converged() {
            self.epochs.to_string()
        } else {
            "N.C.".into()
        }
    }
}

/// Train every configured architecture on every dataset level to
/// `config.train.threshold`.
pub fn architecture_study(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<ArchitectureCell>> {
    config.validate()?;
    if config.train.max_epochs == 0 {
        return Err(PinnError::Config("max_epochs must be at least 1".into()));
    }
    let sets = datasets(config)?;
    let mut cells = Vec::new();
    for arch in &config.architectures {
        let init = init_parameters(arch, config.train.seed);
        for set in &sets {
            let (status, epochs) = match train(arch, &init, set, config.flow, &Beltrami, &config.train) {
                Ok((_, h)) => (h.status, h.epochs_used),
                Err(_) => (TrainStatus::Diverged, 0),
            };
            progress(&format!("{arch} on {} points: {status:?} after {epochs} epochs", set.total()));
            cells.push(ArchitectureCell {
                architecture: arch.clone(),
                level: set.level,
                points: set.total(),
                status,
                epochs,
            });
        }
    }
    Ok(cells)
}

pub fn write_architecture_study(config: &ExperimentConfig, cells: &[ArchitectureCell], dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join("architecture_heatmap.csv");
    let file = std::fs::File::create(&path).map_err(|e| PinnError::io(&path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", provenance_line(config)).map_err(|e| PinnError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(out);
    let mut columns: Vec<usize> = cells.iter().map(|c| c.points).collect();
    columns.sort_unstable();
    columns.dedup();
    let mut header = vec!["architecture".to_string()];
    header.extend(columns.iter().map(|p| p.to_string()));
    w.write_record(&header)?;
    for arch in &config.architectures {
        let mut row = vec![arch.to_string()];
        for &p in &columns {
            row.push(
                cells
                    .iter()
                    .find(|c| &c.architecture == arch && c.points == p)
                    .map(ArchitectureCell::label)
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| PinnError::io(&path, e))?;

    #[derive(Serialize)]
    struct Cells<'a> {
        config: &'a ExperimentConfig,
        seed: u64,
        cells: &'a [ArchitectureCell],
    }
    save_json(
        &dir.join("architecture_study.json"),
        &Cells {
            config,
            seed: config.train.seed,
            cells,
        },
    )
}

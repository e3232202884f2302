//! Residual minimization with Adam or L-BFGS, stopping rules, per-epoch
//! residual history and warm starts.
//!
//! One epoch is one full-batch optimizer iteration: the loss is evaluated at
//! the current parameters and logged, the stopping rules are checked, and
//! then a step is taken. A run that converges therefore returns exactly the
//! parameters whose loss was logged last.

mod adam;
mod lbfgs;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamHyper, AdamState};
pub use lbfgs::{
    lbfgs_minimize, Evaluation, Lbfgs, LbfgsConfig, LbfgsResult, LbfgsStatus, LbfgsStep, LineSearchFailure,
};

use crate::autodiff::{evaluate_loss_with, loss_gradient_into, JetWorkspace};
use crate::error::{PinnError, Result};
use crate::net::{Architecture, ParameterVector};
use crate::physics::{ExactSolution, FlowParameters, LossProblem, LossSpec, ResidualBreakdown};
use crate::sampling::{split_validation, CollocationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub adam: AdamHyper,
    pub lbfgs: LbfgsConfig,
    /// Stop once the active total residual is at or below this value.
    pub threshold: f64,
    pub max_epochs: usize,
    pub augmented: bool,
    pub pressure_boundary: bool,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Abort when the total residual exceeds this value.
    pub divergence_limit: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            adam: AdamHyper::default(),
            lbfgs: LbfgsConfig::default(),
            threshold: 1e-2,
            max_epochs: 50_000,
            augmented: true,
            pressure_boundary: false,
            validation_fraction: 0.15,
            seed: 0,
            divergence_limit: 1e6,
        }
    }
}

impl TrainConfig {
    /// Long-running settings matching the large study: `ε_T = 1e-4`,
    /// 350k epochs.
    pub fn paper_scale() -> Self {
        TrainConfig {
            threshold: 1e-4,
            max_epochs: 350_000,
            ..Self::default()
        }
    }

    /// Defaults for warm starts: L-BFGS fine-tuning.
    pub fn transfer() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Lbfgs,
            ..Self::default()
        }
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            augmented: self.augmented,
            pressure_boundary: self.pressure_boundary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0) {
            return Err(PinnError::Config(format!("threshold must be >= 0, got {}", self.threshold)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(PinnError::Config(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(PinnError::Config("adam learning rate must be positive".into()));
        }
        if self.lbfgs.history == 0 {
            return Err(PinnError::Config("lbfgs history must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStatus {
    Converged,
    /// Epoch cap reached without meeting the threshold ("N.C.").
    MaxEpochsReached,
    Diverged,
    /// L-BFGS line search could not make progress.
    Stalled,
}

impl TrainStatus {
    pub fn converged(self) -> bool {
        self == TrainStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub breakdown: ResidualBreakdown,
    pub validation_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub status: TrainStatus,
    pub epochs_used: usize,
    /// Loss/gradient evaluations on the training set, line searches included.
    pub evaluations: usize,
}

impl TrainingHistory {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn final_total(&self) -> Option<f64> {
        self.last().map(|r| r.breakdown.r_total)
    }

    pub fn domain_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.breakdown.r_domain).collect()
    }

    pub fn boundary_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.breakdown.r_boundary).collect()
    }

    pub fn total_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.breakdown.r_total).collect()
    }
}

enum OptimizerState {
    Adam(AdamState),
    Lbfgs(Lbfgs),
}

/// Stateful optimization run that can be advanced through successive
/// thresholds without resetting optimizer state, so snapshots taken at each
/// threshold equal independent runs with the same seed.
pub struct Trainer {
    arch: Architecture,
    params: Vec<f64>,
    problem: LossProblem,
    validation: Option<LossProblem>,
    config: TrainConfig,
    optimizer: OptimizerState,
    ws: JetWorkspace,
    /// Evaluation of `params` left over from a line search, not yet logged.
    current: Option<(ResidualBreakdown, Vec<f64>)>,
    /// Logged epoch that met a threshold and still owes its step.
    pending: Option<(ResidualBreakdown, Vec<f64>)>,
    records: Vec<EpochRecord>,
    epoch: usize,
    evaluations: usize,
    stopped: Option<TrainStatus>,
}

impl Trainer {
    pub fn new(
        arch: &Architecture,
        init: &ParameterVector,
        collocation: &CollocationSet,
        flow: FlowParameters,
        solution: &dyn ExactSolution,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if init.len() != arch.parameter_count() {
            return Err(PinnError::Architecture(format!(
                "initial parameters have length {}, architecture {arch} needs {}",
                init.len(),
                arch.parameter_count()
            )));
        }
        let spec = config.loss_spec();
        let (train_set, valid_set) = split_validation(collocation, config.validation_fraction, config.seed)?;
        let problem = LossProblem::new(&train_set, flow, solution, spec)?;
        let validation = if valid_set.domain_points.is_empty() || valid_set.boundary_points.is_empty() {
            None
        } else {
            Some(LossProblem::new(&valid_set, flow, solution, spec)?)
        };
        let optimizer = match config.optimizer {
            OptimizerKind::Adam => OptimizerState::Adam(AdamState::new(init.len())),
            OptimizerKind::Lbfgs => OptimizerState::Lbfgs(Lbfgs::new(config.lbfgs)),
        };
        Ok(Trainer {
            arch: arch.clone(),
            params: init.as_slice().to_vec(),
            problem,
            validation,
            config,
            optimizer,
            ws: JetWorkspace::new(arch),
            current: None,
            pending: None,
            records: Vec::new(),
            epoch: 0,
            evaluations: 0,
            stopped: None,
        })
    }

    pub fn params(&self) -> ParameterVector {
        ParameterVector::from_vec_unchecked(self.params.clone())
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Adam moments, when training with Adam.
    pub fn adam_state(&self) -> Option<&AdamState> {
        match &self.optimizer {
            OptimizerState::Adam(s) => Some(s),
            OptimizerState::Lbfgs(_) => None,
        }
    }

    pub fn problem(&self) -> &LossProblem {
        &self.problem
    }

    pub fn history(&self, status: TrainStatus) -> TrainingHistory {
        TrainingHistory {
            records: self.records.clone(),
            status,
            epochs_used: self.epoch,
            evaluations: self.evaluations,
        }
    }

    fn evaluate(&mut self, params: &[f64]) -> Result<(ResidualBreakdown, Vec<f64>)> {
        self.evaluations += 1;
        let mut grad = vec![0.0; params.len()];
        let bd = loss_gradient_into(&mut self.ws, &self.arch, params, &self.problem, &mut grad)?;
        Ok((bd, grad))
    }

    /// Advance until the active total residual is at or below `threshold`
    /// or the cumulative epoch count reaches `max_epochs`.
    pub fn run_until(&mut self, threshold: f64, max_epochs: usize) -> TrainStatus {
        if let Some(s) = self.stopped {
            return s;
        }
        // An epoch already logged by a previous call only needs the threshold
        // check and the step.
        if let Some((bd, grad)) = self.pending.take() {
            if bd.r_total <= threshold {
                self.pending = Some((bd, grad));
                return TrainStatus::Converged;
            }
            if let Err(status) = self.step(bd, grad) {
                return self.stop(status);
            }
        }
        while self.epoch < max_epochs {
            let r = match self.current.take() {
                Some(c) => Ok(c),
                None => {
                    let params = std::mem::take(&mut self.params);
                    let r = self.evaluate(&params);
                    self.params = params;
                    r
                }
            };
            let (bd, grad) = match r {
                Ok(c) => c,
                Err(_) => {
                    self.epoch += 1;
                    return self.stop(TrainStatus::Diverged);
                }
            };
            self.epoch += 1;
            if !bd.r_total.is_finite() {
                return self.stop(TrainStatus::Diverged);
            }
            let validation_total = match &self.validation {
                Some(v) => evaluate_loss_with(&mut self.ws, &self.arch, &self.params, v)
                    .ok()
                    .map(|b| b.r_total),
                None => None,
            };
            self.records.push(EpochRecord {
                epoch: self.epoch,
                breakdown: bd,
                validation_total,
            });
            if bd.r_total > self.config.divergence_limit {
                return self.stop(TrainStatus::Diverged);
            }
            if bd.r_total <= threshold {
                self.pending = Some((bd, grad));
                return TrainStatus::Converged;
            }
            if let Err(status) = self.step(bd, grad) {
                return self.stop(status);
            }
        }
        TrainStatus::MaxEpochsReached
    }

    fn stop(&mut self, status: TrainStatus) -> TrainStatus {
        self.stopped = Some(status);
        status
    }

    fn step(&mut self, bd: ResidualBreakdown, grad: Vec<f64>) -> std::result::Result<(), TrainStatus> {
        if let OptimizerState::Adam(state) = &mut self.optimizer {
            adam_step(&mut self.params, &grad, state, &self.config.adam);
            return Ok(());
        }
        let OptimizerState::Lbfgs(mut solver) =
            std::mem::replace(&mut self.optimizer, OptimizerState::Adam(AdamState::new(0)))
        else {
            unreachable!()
        };
        let current = Evaluation {
            value: bd.r_total,
            grad,
            extra: bd,
        };
        let x = self.params.clone();
        let mut f = |p: &[f64]| -> Option<Evaluation<ResidualBreakdown>> {
            let (b, g) = self.evaluate(p).ok()?;
            Some(Evaluation {
                value: b.r_total,
                grad: g,
                extra: b,
            })
        };
        let mut outcome = solver.step(&x, &current, &mut f);
        if outcome.is_err() {
            // Retry once along steepest descent with fresh memory.
            solver.reset();
            outcome = solver.step(&x, &current, &mut f);
        }
        self.optimizer = OptimizerState::Lbfgs(solver);
        match outcome {
            Ok(step) => {
                self.params = step.x;
                self.current = Some((step.eval.extra, step.eval.grad));
                Ok(())
            }
            Err(fail) => match fail.best {
                Some(best) => {
                    self.params = best.x;
                    self.current = Some((best.eval.extra, best.eval.grad));
                    Ok(())
                }
                None => Err(TrainStatus::Stalled),
            },
        }
    }
}

/// Minimize the total residual from `init` with the configured optimizer.
pub fn train(
    arch: &Architecture,
    init: &ParameterVector,
    collocation: &CollocationSet,
    flow: FlowParameters,
    solution: &dyn ExactSolution,
    config: &TrainConfig,
) -> Result<(ParameterVector, TrainingHistory)> {
    if config.max_epochs == 0 {
        return Err(PinnError::Config("max_epochs must be at least 1".into()));
    }
    let mut trainer = Trainer::new(arch, init, collocation, flow, solution, *config)?;
    let status = trainer.run_until(config.threshold, config.max_epochs);
    Ok((trainer.params(), trainer.history(status)))
}

/// Snapshot of a run at the first time it met one threshold of a ladder.
#[derive(Debug, Clone)]
pub struct LadderSnapshot {
    pub threshold: f64,
    pub status: TrainStatus,
    pub epochs: usize,
    pub params: ParameterVector,
    pub final_breakdown: Option<ResidualBreakdown>,
}

/// Train through decreasing thresholds along one trajectory, taking a
/// snapshot at each. Once a threshold is missed the remaining ones are
/// reported with the same status and parameters.
pub fn train_ladder(
    arch: &Architecture,
    init: &ParameterVector,
    collocation: &CollocationSet,
    flow: FlowParameters,
    solution: &dyn ExactSolution,
    config: &TrainConfig,
    thresholds: &[f64],
) -> Result<(Vec<LadderSnapshot>, TrainingHistory)> {
    let mut trainer = Trainer::new(arch, init, collocation, flow, solution, *config)?;
    let mut out = Vec::with_capacity(thresholds.len());
    let mut last = TrainStatus::Converged;
    for &t in thresholds {
        let status = if last.converged() {
            trainer.run_until(t, config.max_epochs)
        } else {
            last
        };
        last = status;
        out.push(LadderSnapshot {
            threshold: t,
            status,
            epochs: trainer.epoch(),
            params: trainer.params(),
            final_breakdown: trainer.records.last().map(|r| r.breakdown),
        });
    }
    Ok((out, trainer.history(last)))
}

/// Warm-started training from a checkpoint. `max_epochs = 0` returns the
/// checkpoint unchanged.
pub fn transfer_learn(
    checkpoint_arch: &Architecture,
    checkpoint_params: &ParameterVector,
    target_arch: &Architecture,
    collocation: &CollocationSet,
    flow: FlowParameters,
    solution: &dyn ExactSolution,
    config: &TrainConfig,
) -> Result<(ParameterVector, TrainingHistory)> {
    if checkpoint_arch != target_arch {
        return Err(PinnError::Checkpoint(format!(
            "checkpoint architecture {checkpoint_arch} does not match target {target_arch}"
        )));
    }
    if checkpoint_params.len() != target_arch.parameter_count() {
        return Err(PinnError::Checkpoint(format!(
            "checkpoint has {} parameters, architecture {target_arch} needs {}",
            checkpoint_params.len(),
            target_arch.parameter_count()
        )));
    }
    let mut trainer = Trainer::new(target_arch, checkpoint_params, collocation, flow, solution, *config)?;
    if config.max_epochs == 0 {
        return Ok((checkpoint_params.clone(), trainer.history(TrainStatus::MaxEpochsReached)));
    }
    let status = trainer.run_until(config.threshold, config.max_epochs);
    Ok((trainer.params(), trainer.history(status)))
}

//! JSON checkpoints.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same `f64`, and parsed with correct rounding, so a save/load/save cycle
//! reproduces the file byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentConfig;
use crate::error::{PinnError, Result};
use crate::net::{Activation, Architecture, ParameterVector};
use crate::training::{AdamState, TrainStatus};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    pub activation: Activation,
    pub seed: u64,
    pub parameters: ParameterVector,
    pub optimizer_state: Option<AdamState>,
    pub config: ExperimentConfig,
    pub status: TrainStatus,
}

impl Checkpoint {
    pub fn new(
        config: &ExperimentConfig,
        parameters: ParameterVector,
        optimizer_state: Option<AdamState>,
        status: TrainStatus,
    ) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            architecture: config.architecture.clone(),
            activation: config.architecture.activation(),
            seed: config.train.seed,
            parameters,
            optimizer_state,
            config: config.clone(),
            status,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text).map_err(|e| PinnError::Checkpoint(e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| PinnError::Checkpoint("missing format_version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(PinnError::CheckpointVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let ck: Checkpoint = serde_json::from_value(raw).map_err(|e| PinnError::Checkpoint(e.to_string()))?;
        ck.check_shape()?;
        Ok(ck)
    }

    fn check_shape(&self) -> Result<()> {
        let need = self.architecture.parameter_count();
        if self.parameters.len() != need {
            return Err(PinnError::Checkpoint(format!(
                "{} parameters stored, architecture {} needs {need}",
                self.parameters.len(),
                self.architecture
            )));
        }
        if self.activation != self.architecture.activation() {
            return Err(PinnError::Checkpoint("activation does not match architecture".into()));
        }
        if let Some(s) = &self.optimizer_state {
            if s.m.len() != need || s.v.len() != need {
                return Err(PinnError::Checkpoint("optimizer state length does not match parameters".into()));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    std::fs::write(path, checkpoint.to_json()).map_err(|e| PinnError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| PinnError::io(path, e))?;
    Checkpoint::from_json(&text).map_err(|e| match e {
        PinnError::Checkpoint(msg) => PinnError::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{PinnError, Result};
use crate::net::Architecture;
use crate::physics::{DomainSpec, FlowParameters};
use crate::training::TrainConfig;

pub const PRESETS: [&str; 4] = ["desk", "paper", "half-domain", "re10"];

/// Options for warm-started runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferOptions {
    /// Also train from a fresh initialization with the same seed.
    pub cold_baseline: bool,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions { cold_baseline: true }
    }
}

/// Everything needed to reproduce a run or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub domain: DomainSpec,
    pub flow: FlowParameters,
    pub architecture: Architecture,
    pub train: TrainConfig,
    /// Number of nested dataset levels; level `k` holds `12·2^k` points.
    pub levels: usize,
    /// Dataset level used by single runs.
    pub train_level: usize,
    /// Threshold ladder for the convergence study, loosest first.
    pub thresholds: Vec<f64>,
    /// Rows of the architecture study.
    pub architectures: Vec<Architecture>,
    /// Points per side of the evaluation grid.
    pub grid_points: usize,
    pub output_dir: PathBuf,
    pub transfer: TransferOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: "desk".into(),
            domain: DomainSpec::default(),
            flow: FlowParameters::default(),
            architecture: Architecture::with_hidden(&[32, 32]).expect("valid widths"),
            train: TrainConfig::default(),
            levels: 6,
            train_level: 5,
            thresholds: vec![1e-1, 1e-2, 1e-3],
            architectures: study_architectures(),
            grid_points: 100,
            output_dir: PathBuf::from("out"),
            transfer: TransferOptions::default(),
        }
    }
}

/// One and two hidden layers of 32, 64 and 128 neurons.
pub fn study_architectures() -> Vec<Architecture> {
    let mut out = Vec::with_capacity(6);
    for depth in [1, 2] {
        for width in [32, 64, 128] {
            out.push(Architecture::with_hidden(&vec![width; depth]).expect("valid widths"));
        }
    }
    out
}

impl ExperimentConfig {
    /// Named starting point for a configuration.
    pub fn preset(name: &str) -> Result<Self> {
        let base = ExperimentConfig {
            preset: name.to_string(),
            ..ExperimentConfig::default()
        };
        Ok(match name {
            "desk" => base,
            "paper" => ExperimentConfig {
                architecture: Architecture::with_hidden(&[128, 128])?,
                train: TrainConfig::paper_scale(),
                levels: 8,
                train_level: 7,
                thresholds: vec![1e-1, 1e-2, 1e-3, 1e-4],
                ..base
            },
            "half-domain" => ExperimentConfig {
                domain: DomainSpec::new(0.0, 1.0, -1.0, 1.0)?,
                train: TrainConfig::transfer(),
                ..base
            },
            "re10" => ExperimentConfig {
                flow: FlowParameters {
                    g: [0.0, -9.8],
                    ..FlowParameters::default().with_reynolds(10.0)
                },
                train: TrainConfig::transfer(),
                ..base
            },
            other => {
                return Err(PinnError::Config(format!(
                    "unknown preset {other:?} (known: {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.flow.validate()?;
        self.train.validate()?;
        if self.levels == 0 || self.levels > 16 {
            return Err(PinnError::Config(format!("levels must be in 1..=16, got {}", self.levels)));
        }
        if self.train_level >= self.levels {
            return Err(PinnError::Config(format!(
                "train_level {} is outside the {} generated levels",
                self.train_level, self.levels
            )));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(PinnError::Config("thresholds must be a nonempty list of positive values".into()));
        }
        if self.thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(PinnError::Config("thresholds must be strictly decreasing".into()));
        }
        if self.grid_points < 2 {
            return Err(PinnError::Config("grid_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Compact JSON used for provenance lines.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Builds a configuration from a preset, an optional JSON file and
/// `key=value` overrides, in that order.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    tree: Value,
}

impl ConfigBuilder {
    pub fn new(preset: &str) -> Result<Self> {
        Self::from_config(&ExperimentConfig::preset(preset)?)
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Ok(ConfigBuilder {
            tree: serde_json::to_value(config)?,
        })
    }

    /// Merge a JSON file over the current values. Objects merge key by key.
    pub fn merge_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PinnError::io(path, e))?;
        let overlay: Value = serde_json::from_str(&text)
            .map_err(|e| PinnError::Config(format!("{}: {e}", path.display())))?;
        if !overlay.is_object() {
            return Err(PinnError::Config(format!("{}: expected a JSON object", path.display())));
        }
        // A file may name its own preset; start from it before merging.
        if let Some(name) = overlay.get("preset").and_then(Value::as_str) {
            self.tree = serde_json::to_value(ExperimentConfig::preset(name)?)?;
        }
        merge(&mut self.tree, overlay);
        Ok(self)
    }

    /// Apply `a.b.c=value`. The value is parsed as JSON and falls back to a
    /// plain string.
    pub fn set(self, assignment: &str) -> Result<Self> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| PinnError::Config(format!("override {assignment:?} is not key=value")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(PinnError::Config(format!("override {assignment:?} has an empty key")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set_value(key, value)
    }

    pub fn set_value(mut self, key: &str, value: Value) -> Result<Self> {
        let mut node = &mut self.tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| PinnError::Config(format!("{key}: {} is not an object", parts[..i].join("."))))?;
            if !obj.contains_key(*part) {
                return Err(PinnError::Config(format!("unknown configuration key {key:?}")));
            }
            node = obj.get_mut(*part).expect("checked above");
        }
        *node = value;
        Ok(self)
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            serde_json::from_value(self.tree).map_err(|e| PinnError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

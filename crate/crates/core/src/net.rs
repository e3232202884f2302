//! Fully connected network mapping `(x, y)` to `(u, v, p, θ)`.
//!
//! Parameters are stored as one flat vector, layer by layer: the weight
//! matrix of each layer in row-major order (`fan_out` rows of `fan_in`
//! entries) followed by its bias vector.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{FieldState, Point2};
use crate::error::{PinnError, Result};

pub const INPUT_WIDTH: usize = 2;
pub const OUTPUT_WIDTH: usize = 4;

/// Hidden-layer activation. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerLayout {
    #[inline]
    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.weight_offset..self.bias_offset]
    }

    #[inline]
    pub fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.bias_offset..self.bias_offset + self.fan_out]
    }
}

/// Layer widths of the network, e.g. `2-32-32-4`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    widths: Vec<usize>,
    activation: Activation,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(PinnError::Architecture(format!(
                "need at least input and output widths, got {widths:?}"
            )));
        }
        if widths[0] != INPUT_WIDTH || widths[widths.len() - 1] != OUTPUT_WIDTH {
            return Err(PinnError::Architecture(format!(
                "first width must be {INPUT_WIDTH} and last width {OUTPUT_WIDTH}, got {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(PinnError::Architecture(format!(
                "layer widths must be positive, got {widths:?}"
            )));
        }
        Ok(Architecture {
            widths,
            activation: Activation::Tanh,
        })
    }

    /// Network with the given hidden widths between the fixed input and output.
    pub fn with_hidden(hidden: &[usize]) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(INPUT_WIDTH);
        widths.extend_from_slice(hidden);
        widths.push(OUTPUT_WIDTH);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn layers(&self) -> Vec<LayerLayout> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let layout = LayerLayout {
                    fan_in: w[0],
                    fan_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                layout
            })
            .collect()
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for Architecture {
    type Err = PinnError;

    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .trim()
            .split('-')
            .map(|part| {
                part.trim().parse::<usize>().map_err(|_| {
                    PinnError::Architecture(format!("cannot parse layer width {part:?} in {s:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Architecture::new(widths)
    }
}

impl Serialize for Architecture {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Architecture {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Flat trainable parameters of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(arch: &Architecture, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.parameter_count() {
            return Err(PinnError::Architecture(format!(
                "architecture {arch} has {} parameters, got {}",
                arch.parameter_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PinnError::Argument(format!("parameter {i} is not finite")));
        }
        Ok(ParameterVector(values))
    }

    pub fn zeros(arch: &Architecture) -> Self {
        ParameterVector(vec![0.0; arch.parameter_count()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        ParameterVector(values)
    }
}

pub fn parameter_count(arch: &Architecture) -> usize {
    arch.parameter_count()
}

/// Glorot-uniform weights and zero biases, deterministic in `(arch, seed)`.
pub fn init_parameters(arch: &Architecture, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; arch.parameter_count()];
    for layer in arch.layers() {
        let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        for w in &mut values[layer.weight_offset..layer.bias_offset] {
            *w = dist.sample(&mut rng);
        }
    }
    ParameterVector(values)
}

pub(crate) fn check_length(arch: &Architecture, params: &[f64]) -> Result<()> {
    if params.len() != arch.parameter_count() {
        return Err(PinnError::Architecture(format!(
            "architecture {arch} has {} parameters, got {}",
            arch.parameter_count(),
            params.len()
        )));
    }
    Ok(())
}

/// Evaluate the network at a point.
pub fn forward(arch: &Architecture, params: &ParameterVector, point: Point2) -> Result<FieldState> {
    forward_slice(arch, params.as_slice(), point)
}

pub(crate) fn forward_slice(arch: &Architecture, params: &[f64], point: Point2) -> Result<FieldState> {
    check_length(arch, params)?;
    let layers = arch.layers();
    let mut input = vec![point.x, point.y];
    let mut output = Vec::with_capacity(arch.max_width());
    let last = layers.len() - 1;
    for (l, layer) in layers.iter().enumerate() {
        let w = layer.weights(params);
        let b = layer.bias(params);
        output.clear();
        for i in 0..layer.fan_out {
            let row = &w[i * layer.fan_in..(i + 1) * layer.fan_in];
            let mut acc = 0.0;
            for (wij, aj) in row.iter().zip(&input) {
                acc += wij * aj;
            }
            let z = acc + b[i];
            output.push(if l == last { z } else { z.tanh() });
        }
        std::mem::swap(&mut input, &mut output);
    }
    Ok(FieldState {
        u: input[0],
        v: input[1],
        p: input[2],
        theta: input[3],
    })
}

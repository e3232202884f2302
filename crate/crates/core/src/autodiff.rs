//! Second-order spatial jets of the network and exact parameter gradients.
//!
//! Every scalar flowing through the network is carried as a truncated
//! Taylor jet `[f, f_x, f_y, f_xx, f_xy, f_yy]` in the two inputs. The loss
//! gradient is obtained by reverse accumulation through that jet-valued
//! forward pass, so both kinds of derivatives are exact up to rounding.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{PinnError, Result};
use crate::net::{check_length, Architecture, LayerLayout, ParameterVector};
use crate::physics::{self, LossProblem, ResidualBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

/// Values of `(u, v, p, θ)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldState {
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub theta: f64,
}

impl FieldState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.u, self.v, self.p, self.theta]
    }
}

/// A scalar with its first and second partial derivatives in `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    pub const fn constant(value: f64) -> Self {
        Jet {
            value,
            dx: 0.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.value, self.dx, self.dy, self.dxx, self.dxy, self.dyy]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Jet {
            value: a[0],
            dx: a[1],
            dy: a[2],
            dxx: a[3],
            dxy: a[4],
            dyy: a[5],
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            value: self.value + o.value,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            value: self.value - o.value,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dxy: self.dxy - o.dxy,
            dyy: self.dyy - o.dyy,
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet {
            value: self.value * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }
}

/// Second-order jets of all four fields at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldJet2 {
    pub u: Jet,
    pub v: Jet,
    pub p: Jet,
    pub theta: Jet,
}

impl FieldJet2 {
    pub fn fields(&self) -> [Jet; 4] {
        [self.u, self.v, self.p, self.theta]
    }

    pub fn from_fields(f: [Jet; 4]) -> Self {
        FieldJet2 {
            u: f[0],
            v: f[1],
            p: f[2],
            theta: f[3],
        }
    }

    pub fn values(&self) -> FieldState {
        FieldState {
            u: self.u.value,
            v: self.v.value,
            p: self.p.value,
            theta: self.theta.value,
        }
    }

    pub fn divergence(&self) -> f64 {
        self.u.dx + self.v.dy
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(Jet::is_finite)
    }
}

type Coeffs = [f64; 6];

/// Scratch buffers for jet forward passes and their reverse sweeps.
///
/// `acts[l]` holds the jets entering affine layer `l` (so `acts[0]` is the
/// seeded input and the last entry is the network output); `pre[l]` holds
/// the pre-activation jets of hidden layer `l`.
pub(crate) struct JetWorkspace {
    layers: Vec<LayerLayout>,
    acts: Vec<Vec<Coeffs>>,
    pre: Vec<Vec<Coeffs>>,
    adj: Vec<Coeffs>,
    adj_prev: Vec<Coeffs>,
}

impl JetWorkspace {
    pub(crate) fn new(arch: &Architecture) -> Self {
        let layers = arch.layers();
        let mut acts = vec![vec![[0.0; 6]; 2]];
        let mut pre = Vec::with_capacity(layers.len());
        for layer in &layers {
            acts.push(vec![[0.0; 6]; layer.fan_out]);
            pre.push(vec![[0.0; 6]; layer.fan_out]);
        }
        let width = arch.max_width();
        JetWorkspace {
            layers,
            acts,
            pre,
            adj: vec![[0.0; 6]; width],
            adj_prev: vec![[0.0; 6]; width],
        }
    }

    /// Jet forward pass; leaves intermediates in place for [`Self::backward`].
    pub(crate) fn forward(&mut self, params: &[f64], point: Point2) -> Result<FieldJet2> {
        self.acts[0][0] = [point.x, 1.0, 0.0, 0.0, 0.0, 0.0];
        self.acts[0][1] = [point.y, 0.0, 1.0, 0.0, 0.0, 0.0];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let w = layer.weights(params);
            let b = layer.bias(params);
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let input = &head[l];
            let output = &mut tail[0];
            let pre = &mut self.pre[l];
            for i in 0..layer.fan_out {
                let row = &w[i * layer.fan_in..(i + 1) * layer.fan_in];
                let mut z = [0.0; 6];
                for (wij, a) in row.iter().zip(input.iter()) {
                    for k in 0..6 {
                        z[k] += wij * a[k];
                    }
                }
                z[0] += b[i];
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(PinnError::NumericalOverflow { layer: l + 1 });
                }
                if l == last {
                    output[i] = z;
                } else {
                    pre[i] = z;
                    output[i] = tanh_jet(&z);
                }
            }
            if output.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
                return Err(PinnError::NumericalOverflow { layer: l + 1 });
            }
        }
        let out = &self.acts[last + 1];
        Ok(FieldJet2 {
            u: Jet::from_array(out[0]),
            v: Jet::from_array(out[1]),
            p: Jet::from_array(out[2]),
            theta: Jet::from_array(out[3]),
        })
    }

    /// Accumulate into `grad` the parameter gradient of a scalar whose
    /// adjoints with respect to the four output jets are `out_adj`.
    /// Must follow a [`Self::forward`] call at the same parameters.
    pub(crate) fn backward(&mut self, params: &[f64], out_adj: &FieldJet2, grad: &mut [f64]) {
        let n_layers = self.layers.len();
        for (i, f) in out_adj.fields().iter().enumerate() {
            self.adj[i] = f.to_array();
        }
        for l in (0..n_layers).rev() {
            let layer = self.layers[l];
            // `self.adj[..fan_out]` holds adjoints of this layer's pre-activation.
            if l != n_layers - 1 {
                let pre = &self.pre[l];
                let act = &self.acts[l + 1];
                for i in 0..layer.fan_out {
                    self.adj[i] = tanh_jet_adjoint(&pre[i], act[i][0], &self.adj[i]);
                }
            }
            let w = layer.weights(params);
            let input = &self.acts[l];
            let (gw, gb) = grad[layer.weight_offset..layer.bias_offset + layer.fan_out]
                .split_at_mut(layer.fan_in * layer.fan_out);
            for i in 0..layer.fan_out {
                let az = &self.adj[i];
                gb[i] += az[0];
                let grow = &mut gw[i * layer.fan_in..(i + 1) * layer.fan_in];
                for (g, a) in grow.iter_mut().zip(input.iter()) {
                    let mut s = 0.0;
                    for k in 0..6 {
                        s += az[k] * a[k];
                    }
                    *g += s;
                }
            }
            if l > 0 {
                let prev = &mut self.adj_prev[..layer.fan_in];
                prev.iter_mut().for_each(|c| *c = [0.0; 6]);
                for i in 0..layer.fan_out {
                    let az = self.adj[i];
                    let row = &w[i * layer.fan_in..(i + 1) * layer.fan_in];
                    for (pa, &wij) in prev.iter_mut().zip(row) {
                        for k in 0..6 {
                            pa[k] += wij * az[k];
                        }
                    }
                }
                std::mem::swap(&mut self.adj, &mut self.adj_prev);
            }
        }
    }
}

#[inline]
fn tanh_jet(z: &Coeffs) -> Coeffs {
    let t = z[0].tanh();
    let d1 = 1.0 - t * t;
    let d2 = -2.0 * t * d1;
    [
        t,
        d1 * z[1],
        d1 * z[2],
        d2 * z[1] * z[1] + d1 * z[3],
        d2 * z[1] * z[2] + d1 * z[4],
        d2 * z[2] * z[2] + d1 * z[5],
    ]
}

/// Reverse sweep through [`tanh_jet`]: adjoint of `z` given the adjoint of
/// the output jet. `t` is the stored value `tanh(z[0])`.
#[inline]
fn tanh_jet_adjoint(z: &Coeffs, t: f64, ah: &Coeffs) -> Coeffs {
    let d1 = 1.0 - t * t;
    let d2 = -2.0 * t * d1;
    let a_d1 = ah[1] * z[1] + ah[2] * z[2] + ah[3] * z[3] + ah[4] * z[4] + ah[5] * z[5];
    let a_d2 = ah[3] * z[1] * z[1] + ah[4] * z[1] * z[2] + ah[5] * z[2] * z[2];
    // d1 = 1 - t², d2 = -2t + 2t³
    let a_t = ah[0] - 2.0 * t * a_d1 + (6.0 * t * t - 2.0) * a_d2;
    [
        a_t * d1,
        ah[1] * d1 + 2.0 * ah[3] * d2 * z[1] + ah[4] * d2 * z[2],
        ah[2] * d1 + ah[4] * d2 * z[1] + 2.0 * ah[5] * d2 * z[2],
        ah[3] * d1,
        ah[4] * d1,
        ah[5] * d1,
    ]
}

/// Values and spatial derivatives up to second order of all four outputs.
pub fn evaluate_jet(arch: &Architecture, params: &ParameterVector, point: Point2) -> Result<FieldJet2> {
    check_length(arch, params.as_slice())?;
    JetWorkspace::new(arch).forward(params.as_slice(), point)
}

/// Jets at many points, reusing one workspace.
pub fn evaluate_jets(arch: &Architecture, params: &ParameterVector, points: &[Point2]) -> Result<Vec<FieldJet2>> {
    check_length(arch, params.as_slice())?;
    let mut ws = JetWorkspace::new(arch);
    points.iter().map(|&p| ws.forward(params.as_slice(), p)).collect()
}

/// Scalar loss of `problem` at `params` together with its exact gradient.
///
/// Per-point contributions are reduced sequentially in collocation order,
/// so the result is bit-reproducible.
pub fn loss_gradient(
    arch: &Architecture,
    params: &ParameterVector,
    problem: &LossProblem,
) -> Result<(ResidualBreakdown, Vec<f64>)> {
    let mut ws = JetWorkspace::new(arch);
    let mut grad = vec![0.0; params.len()];
    let breakdown = loss_gradient_into(&mut ws, arch, params.as_slice(), problem, &mut grad)?;
    Ok((breakdown, grad))
}

pub(crate) fn loss_gradient_into(
    ws: &mut JetWorkspace,
    arch: &Architecture,
    params: &[f64],
    problem: &LossProblem,
    grad: &mut [f64],
) -> Result<ResidualBreakdown> {
    check_length(arch, params)?;
    problem.check_nonempty()?;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut acc = physics::BreakdownAccumulator::new(problem);
    let n_domain = problem.domain().len() as f64;
    let n_boundary = problem.boundary().len() as f64;

    for sample in problem.domain() {
        let jet = ws.forward(params, sample.point)?;
        let raw = problem.domain_raw(&jet, &sample.forcing);
        acc.add_domain(&raw);
        // d(mean r²)/dr = 2r / N
        let weights = raw.scaled(2.0 / n_domain);
        let adj = physics::domain_residual_adjoint(&jet, problem.flow(), &weights);
        ws.backward(params, &adj, grad);
    }
    for sample in problem.boundary() {
        let jet = ws.forward(params, sample.point)?;
        let raw = problem.boundary_raw_with_pressure(&jet.values(), sample);
        acc.add_boundary(&raw);
        let adj = physics::boundary_residual_adjoint(&raw, 2.0 / n_boundary);
        ws.backward(params, &adj, grad);
    }
    acc.finish()
}

/// Loss breakdown without gradients.
pub fn evaluate_loss(
    arch: &Architecture,
    params: &ParameterVector,
    problem: &LossProblem,
) -> Result<ResidualBreakdown> {
    let mut ws = JetWorkspace::new(arch);
    evaluate_loss_with(&mut ws, arch, params.as_slice(), problem)
}

pub(crate) fn evaluate_loss_with(
    ws: &mut JetWorkspace,
    arch: &Architecture,
    params: &[f64],
    problem: &LossProblem,
) -> Result<ResidualBreakdown> {
    check_length(arch, params)?;
    physics::evaluate_breakdown(problem, |p| ws.forward(params, p))
}

//! Boussinesq residuals, the pressure-Poisson augmentation and the Beltrami
//! manufactured solution.
//!
//! Domain residuals (per point, before squaring):
//!
//! ```text
//! r_u   = u u_x + v u_y + p_x - ν Δu + g_x β θ - f_bx
//! r_v   = u v_x + v v_y + p_y - ν Δv + g_y β θ - f_by
//! r_div = u_x + v_y
//! r_θ   = u θ_x + v θ_y - α Δθ - f
//! ```
//!
//! Augmentation residuals:
//!
//! ```text
//! r_p     = Δp - ∇·(f_b - u·∇u - g β θ)
//! r_div,x = u_xx + v_xy
//! r_div,y = u_xy + v_yy
//! ```
//!
//! The viscous term is written `ν Δu`, which equals `∇·(2ν ∇ˢu)` for
//! constant `ν` and divergence-free `u`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{FieldJet2, FieldState, Jet, Point2};
use crate::error::{PinnError, Result};
use crate::sampling::{CollocationSet, Dirichlet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParameters {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub g: [f64; 2],
}

impl Default for FlowParameters {
    fn default() -> Self {
        FlowParameters {
            nu: 1.0,
            alpha: 1.0,
            beta: 1.0,
            g: [0.0, -1.0],
        }
    }
}

impl FlowParameters {
    /// Unit-scale flow with `ν = 1/Re`.
    pub fn with_reynolds(self, reynolds: f64) -> Self {
        FlowParameters {
            nu: 1.0 / reynolds,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.nu, self.alpha, self.beta, self.g[0], self.g[1]];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PinnError::Config("flow parameters must be finite".into()));
        }
        if self.nu <= 0.0 || self.alpha <= 0.0 {
            return Err(PinnError::Config(format!(
                "nu and alpha must be positive (nu = {}, alpha = {})",
                self.nu, self.alpha
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
        }
    }
}

impl DomainSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let d = DomainSpec {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !ok || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(PinnError::Config(format!("degenerate domain {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Body force, heat source and the divergence of the body force at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointForcing {
    pub fb: [f64; 2],
    pub f: f64,
    pub div_fb: f64,
}

/// A problem with a closed-form solution and the forcing that drives it.
pub trait ExactSolution: Sync {
    fn exact(&self, p: Point2) -> FieldState {
        self.exact_jet(p).values()
    }
    fn exact_jet(&self, p: Point2) -> FieldJet2;
    fn forcing(&self, p: Point2, flow: &FlowParameters) -> PointForcing;
}

/// The Beltrami-type manufactured solution on the bi-unit square.
#[derive(Debug, Clone, Copy, Default)]
pub struct Beltrami;

impl ExactSolution for Beltrami {
    fn exact(&self, p: Point2) -> FieldState {
        beltrami_exact(p)
    }

    fn exact_jet(&self, p: Point2) -> FieldJet2 {
        beltrami_exact_jet(p)
    }

    fn forcing(&self, p: Point2, flow: &FlowParameters) -> PointForcing {
        let (fb, f) = beltrami_forcing(p, flow);
        PointForcing {
            fb,
            f,
            div_fb: beltrami_forcing_divergence(p, flow),
        }
    }
}

pub fn beltrami_exact(p: Point2) -> FieldState {
    let (sx, cx) = (PI * p.x).sin_cos();
    let (sy, cy) = (PI * p.y).sin_cos();
    FieldState {
        u: -cx * sy,
        v: sx * cy,
        p: -0.25 * ((2.0 * PI * p.x).cos() + (2.0 * PI * p.y).cos()),
        theta: cx * cy,
    }
}

pub fn beltrami_exact_jet(p: Point2) -> FieldJet2 {
    let (sx, cx) = (PI * p.x).sin_cos();
    let (sy, cy) = (PI * p.y).sin_cos();
    let (s2x, c2x) = (2.0 * PI * p.x).sin_cos();
    let (s2y, c2y) = (2.0 * PI * p.y).sin_cos();
    let pi2 = PI * PI;
    FieldJet2 {
        u: Jet {
            value: -cx * sy,
            dx: PI * sx * sy,
            dy: -PI * cx * cy,
            dxx: pi2 * cx * sy,
            dxy: pi2 * sx * cy,
            dyy: pi2 * cx * sy,
        },
        v: Jet {
            value: sx * cy,
            dx: PI * cx * cy,
            dy: -PI * sx * sy,
            dxx: -pi2 * sx * cy,
            dxy: -pi2 * cx * sy,
            dyy: -pi2 * sx * cy,
        },
        p: Jet {
            value: -0.25 * (c2x + c2y),
            dx: 0.5 * PI * s2x,
            dy: 0.5 * PI * s2y,
            dxx: pi2 * c2x,
            dxy: 0.0,
            dyy: pi2 * c2y,
        },
        theta: Jet {
            value: cx * cy,
            dx: -PI * sx * cy,
            dy: -PI * cx * sy,
            dxx: -pi2 * cx * cy,
            dxy: pi2 * sx * sy,
            dyy: -pi2 * cx * cy,
        },
    }
}

/// Body force `f_b` and heat source `f` that make the Beltrami fields exact.
pub fn beltrami_forcing(p: Point2, flow: &FlowParameters) -> ([f64; 2], f64) {
    let (sx, cx) = (PI * p.x).sin_cos();
    let (sy, cy) = (PI * p.y).sin_cos();
    let k = 2.0 * PI * PI;
    let fb = [
        -k * flow.nu * cx * sy + flow.g[0] * flow.beta * cx * cy,
        k * flow.nu * sx * cy + flow.g[1] * flow.beta * cx * cy,
    ];
    (fb, k * flow.alpha * cx * cy)
}

/// `∇·f_b` of [`beltrami_forcing`]; the viscous parts cancel.
pub fn beltrami_forcing_divergence(p: Point2, flow: &FlowParameters) -> f64 {
    let (sx, cx) = (PI * p.x).sin_cos();
    let (sy, cy) = (PI * p.y).sin_cos();
    let k = 2.0 * PI * PI * PI * flow.nu;
    let dfbx_dx = k * sx * sy - flow.g[0] * flow.beta * PI * sx * cy;
    let dfby_dy = -k * sx * sy - flow.g[1] * flow.beta * PI * cx * sy;
    dfbx_dx + dfby_dy
}

/// Unsquared pointwise residuals at one domain point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DomainResiduals {
    pub momentum_x: f64,
    pub momentum_y: f64,
    pub divergence: f64,
    pub energy: f64,
    /// Pressure-Poisson, `(∇·u)_x` and `(∇·u)_y`, when augmentation is active.
    pub augmentation: Option<[f64; 3]>,
}

impl DomainResiduals {
    pub(crate) fn scaled(&self, s: f64) -> Self {
        DomainResiduals {
            momentum_x: self.momentum_x * s,
            momentum_y: self.momentum_y * s,
            divergence: self.divergence * s,
            energy: self.energy * s,
            augmentation: self.augmentation.map(|a| [a[0] * s, a[1] * s, a[2] * s]),
        }
    }
}

fn domain_residuals(jet: &FieldJet2, flow: &FlowParameters, fb: [f64; 2], f: f64) -> [f64; 4] {
    let (u, v, p, th) = (&jet.u, &jet.v, &jet.p, &jet.theta);
    [
        u.value * u.dx + v.value * u.dy + p.dx - flow.nu * u.laplacian()
            + flow.g[0] * flow.beta * th.value
            - fb[0],
        u.value * v.dx + v.value * v.dy + p.dy - flow.nu * v.laplacian()
            + flow.g[1] * flow.beta * th.value
            - fb[1],
        u.dx + v.dy,
        u.value * th.dx + v.value * th.dy - flow.alpha * th.laplacian() - f,
    ]
}

/// `∇·(u·∇u)` expanded with the product rule.
fn convective_divergence(jet: &FieldJet2) -> f64 {
    let (u, v) = (&jet.u, &jet.v);
    u.dx * u.dx + u.value * u.dxx + 2.0 * u.dy * v.dx + v.value * u.dxy + u.value * v.dxy
        + v.dy * v.dy
        + v.value * v.dyy
}

fn augmentation_residuals(jet: &FieldJet2, flow: &FlowParameters, div_fb: f64) -> [f64; 3] {
    let (u, v, p, th) = (&jet.u, &jet.v, &jet.p, &jet.theta);
    let buoyancy_div = flow.beta * (flow.g[0] * th.dx + flow.g[1] * th.dy);
    [
        p.laplacian() - (div_fb - convective_divergence(jet) - buoyancy_div),
        u.dxx + v.dxy,
        u.dxy + v.dyy,
    ]
}

/// Squared momentum-x, momentum-y, continuity and energy residuals.
pub fn domain_residual_point(jet: &FieldJet2, flow: &FlowParameters, fb: [f64; 2], f: f64) -> [f64; 4] {
    domain_residuals(jet, flow, fb, f).map(|r| r * r)
}

/// Squared pressure-Poisson, `(∇·u)_x` and `(∇·u)_y` residuals.
pub fn augmentation_residual_point(jet: &FieldJet2, flow: &FlowParameters, div_fb: f64) -> [f64; 3] {
    augmentation_residuals(jet, flow, div_fb).map(|r| r * r)
}

/// Squared Dirichlet mismatches for `u`, `v` and `θ`.
pub fn boundary_residual_point(pred: &FieldState, target: &Dirichlet) -> [f64; 3] {
    [
        (pred.u - target.u).powi(2),
        (pred.v - target.v).powi(2),
        (pred.theta - target.theta).powi(2),
    ]
}

/// Adjoint of `Σ_k w_k r_k` with respect to the 24 jet entries, where the
/// weights `w_k` are passed in the slots of a [`DomainResiduals`].
pub(crate) fn domain_residual_adjoint(jet: &FieldJet2, flow: &FlowParameters, w: &DomainResiduals) -> FieldJet2 {
    let (u, v, th) = (&jet.u, &jet.v, &jet.theta);
    let mut au = Jet::default();
    let mut av = Jet::default();
    let mut ap = Jet::default();
    let mut at = Jet::default();

    let w1 = w.momentum_x;
    au.value += w1 * u.dx;
    au.dx += w1 * u.value;
    av.value += w1 * u.dy;
    au.dy += w1 * v.value;
    ap.dx += w1;
    au.dxx -= flow.nu * w1;
    au.dyy -= flow.nu * w1;
    at.value += w1 * flow.g[0] * flow.beta;

    let w2 = w.momentum_y;
    au.value += w2 * v.dx;
    av.dx += w2 * u.value;
    av.value += w2 * v.dy;
    av.dy += w2 * v.value;
    ap.dy += w2;
    av.dxx -= flow.nu * w2;
    av.dyy -= flow.nu * w2;
    at.value += w2 * flow.g[1] * flow.beta;

    let w3 = w.divergence;
    au.dx += w3;
    av.dy += w3;

    let w4 = w.energy;
    au.value += w4 * th.dx;
    at.dx += w4 * u.value;
    av.value += w4 * th.dy;
    at.dy += w4 * v.value;
    at.dxx -= flow.alpha * w4;
    at.dyy -= flow.alpha * w4;

    if let Some([w5, w6, w7]) = w.augmentation {
        ap.dxx += w5;
        ap.dyy += w5;
        at.dx += w5 * flow.beta * flow.g[0];
        at.dy += w5 * flow.beta * flow.g[1];
        au.value += w5 * (u.dxx + v.dxy);
        au.dx += w5 * 2.0 * u.dx;
        au.dy += w5 * 2.0 * v.dx;
        au.dxx += w5 * u.value;
        au.dxy += w5 * v.value;
        av.value += w5 * (u.dxy + v.dyy);
        av.dx += w5 * 2.0 * u.dy;
        av.dy += w5 * 2.0 * v.dy;
        av.dxy += w5 * u.value;
        av.dyy += w5 * v.value;

        au.dxx += w6;
        av.dxy += w6;

        au.dxy += w7;
        av.dyy += w7;
    }

    FieldJet2 {
        u: au,
        v: av,
        p: ap,
        theta: at,
    }
}

/// Unsquared boundary mismatches `(u, v, θ[, p])`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryResiduals {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub p: Option<f64>,
}

pub(crate) fn boundary_residual_adjoint(r: &BoundaryResiduals, scale: f64) -> FieldJet2 {
    FieldJet2 {
        u: Jet::constant(scale * r.u),
        v: Jet::constant(scale * r.v),
        p: Jet::constant(r.p.map_or(0.0, |p| scale * p)),
        theta: Jet::constant(scale * r.theta),
    }
}

/// Which terms enter the total residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSpec {
    /// Add the pressure-Poisson augmentation to the total.
    pub augmented: bool,
    /// Add a pressure Dirichlet mismatch to the boundary residual.
    pub pressure_boundary: bool,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            augmented: true,
            pressure_boundary: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSample {
    pub point: Point2,
    pub forcing: PointForcing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: Point2,
    pub target: Dirichlet,
    pub pressure: f64,
}

/// Collocation points with precomputed forcing and boundary data, ready for
/// repeated loss evaluation.
#[derive(Debug, Clone)]
pub struct LossProblem {
    domain: Vec<DomainSample>,
    boundary: Vec<BoundarySample>,
    flow: FlowParameters,
    spec: LossSpec,
}

impl LossProblem {
    pub fn new(
        set: &CollocationSet,
        flow: FlowParameters,
        solution: &dyn ExactSolution,
        spec: LossSpec,
    ) -> Result<Self> {
        flow.validate()?;
        let domain = set
            .domain_points
            .iter()
            .map(|&point| DomainSample {
                point,
                forcing: solution.forcing(point, &flow),
            })
            .collect();
        let boundary = set
            .boundary_points
            .iter()
            .map(|b| BoundarySample {
                point: b.point,
                target: b.target,
                pressure: if spec.pressure_boundary {
                    solution.exact(b.point).p
                } else {
                    0.0
                },
            })
            .collect();
        let problem = LossProblem {
            domain,
            boundary,
            flow,
            spec,
        };
        problem.check_nonempty()?;
        Ok(problem)
    }

    pub fn from_samples(
        domain: Vec<DomainSample>,
        boundary: Vec<BoundarySample>,
        flow: FlowParameters,
        spec: LossSpec,
    ) -> Result<Self> {
        let problem = LossProblem {
            domain,
            boundary,
            flow,
            spec,
        };
        problem.check_nonempty()?;
        Ok(problem)
    }

    pub fn domain(&self) -> &[DomainSample] {
        &self.domain
    }

    pub fn boundary(&self) -> &[BoundarySample] {
        &self.boundary
    }

    pub fn flow(&self) -> &FlowParameters {
        &self.flow
    }

    pub fn spec(&self) -> LossSpec {
        self.spec
    }

    pub(crate) fn check_nonempty(&self) -> Result<()> {
        if self.domain.is_empty() || self.boundary.is_empty() {
            return Err(PinnError::Config(format!(
                "loss needs domain and boundary points (got {} and {})",
                self.domain.len(),
                self.boundary.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn domain_raw(&self, jet: &FieldJet2, forcing: &PointForcing) -> DomainResiduals {
        let [momentum_x, momentum_y, divergence, energy] =
            domain_residuals(jet, &self.flow, forcing.fb, forcing.f);
        DomainResiduals {
            momentum_x,
            momentum_y,
            divergence,
            energy,
            augmentation: self
                .spec
                .augmented
                .then(|| augmentation_residuals(jet, &self.flow, forcing.div_fb)),
        }
    }

    pub(crate) fn boundary_raw(&self, pred: &FieldState, sample: &Dirichlet) -> BoundaryResiduals {
        BoundaryResiduals {
            u: pred.u - sample.u,
            v: pred.v - sample.v,
            theta: pred.theta - sample.theta,
            p: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationBreakdown {
    pub r_p: f64,
    pub r_div_x: f64,
    pub r_div_y: f64,
}

/// Mean-squared residual components and their sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualBreakdown {
    pub r_u: f64,
    pub r_v: f64,
    pub r_div: f64,
    pub r_theta: f64,
    pub r_u_b: f64,
    pub r_v_b: f64,
    pub r_theta_b: f64,
    pub r_p_b: Option<f64>,
    pub augmentation: Option<AugmentationBreakdown>,
    pub r_domain: f64,
    pub r_boundary: f64,
    pub r_augm: Option<f64>,
    pub r_total: f64,
}

impl ResidualBreakdown {
    fn from_components(
        domain: [f64; 4],
        boundary: [f64; 3],
        r_p_b: Option<f64>,
        augmentation: Option<[f64; 3]>,
    ) -> Self {
        let [r_u, r_v, r_div, r_theta] = domain;
        let [r_u_b, r_v_b, r_theta_b] = boundary;
        let r_domain = r_u + r_v + r_div + r_theta;
        let r_boundary = match r_p_b {
            Some(p) => r_u_b + r_v_b + r_theta_b + p,
            None => r_u_b + r_v_b + r_theta_b,
        };
        let augmentation = augmentation.map(|[r_p, r_div_x, r_div_y]| AugmentationBreakdown {
            r_p,
            r_div_x,
            r_div_y,
        });
        let r_augm = augmentation.map(|a| a.r_p + a.r_div_x + a.r_div_y);
        let r_total = match r_augm {
            Some(a) => r_domain + r_boundary + a,
            None => r_domain + r_boundary,
        };
        ResidualBreakdown {
            r_u,
            r_v,
            r_div,
            r_theta,
            r_u_b,
            r_v_b,
            r_theta_b,
            r_p_b,
            augmentation,
            r_domain,
            r_boundary,
            r_augm,
            r_total,
        }
    }

    /// Domain plus boundary residual, without the augmentation.
    pub fn bare_total(&self) -> f64 {
        self.r_domain + self.r_boundary
    }

    pub fn is_finite(&self) -> bool {
        self.r_total.is_finite()
    }
}

/// Aggregate squared pointwise residuals into mean components.
///
/// Domain and augmentation components average over domain points, boundary
/// components over boundary points.
pub fn total_loss(
    domain_sq: &[[f64; 4]],
    boundary_sq: &[[f64; 3]],
    augmentation_sq: Option<&[[f64; 3]]>,
) -> Result<ResidualBreakdown> {
    if domain_sq.is_empty() || boundary_sq.is_empty() {
        return Err(PinnError::Config(format!(
            "loss needs domain and boundary points (got {} and {})",
            domain_sq.len(),
            boundary_sq.len()
        )));
    }
    if let Some(a) = augmentation_sq {
        if a.len() != domain_sq.len() {
            return Err(PinnError::Argument(
                "augmentation residuals must align with domain points".into(),
            ));
        }
    }
    let domain = column_means(domain_sq);
    let boundary = column_means(boundary_sq);
    let aug = augmentation_sq.map(column_means);
    Ok(ResidualBreakdown::from_components(domain, boundary, None, aug))
}

fn column_means<const N: usize>(rows: &[[f64; N]]) -> [f64; N] {
    let mut sums = [0.0; N];
    for row in rows {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    sums.map(|s| s / rows.len() as f64)
}

/// Sequential accumulator for the breakdown of one loss evaluation.
pub(crate) struct BreakdownAccumulator {
    domain: [f64; 4],
    boundary: [f64; 3],
    pressure_b: f64,
    aug: [f64; 3],
    n_domain: usize,
    n_boundary: usize,
    spec: LossSpec,
}

impl BreakdownAccumulator {
    pub(crate) fn new(problem: &LossProblem) -> Self {
        BreakdownAccumulator {
            domain: [0.0; 4],
            boundary: [0.0; 3],
            pressure_b: 0.0,
            aug: [0.0; 3],
            n_domain: 0,
            n_boundary: 0,
            spec: problem.spec,
        }
    }

    pub(crate) fn add_domain(&mut self, r: &DomainResiduals) {
        self.domain[0] += r.momentum_x * r.momentum_x;
        self.domain[1] += r.momentum_y * r.momentum_y;
        self.domain[2] += r.divergence * r.divergence;
        self.domain[3] += r.energy * r.energy;
        if let Some(a) = r.augmentation {
            for k in 0..3 {
                self.aug[k] += a[k] * a[k];
            }
        }
        self.n_domain += 1;
    }

    pub(crate) fn add_boundary(&mut self, r: &BoundaryResiduals) {
        self.boundary[0] += r.u * r.u;
        self.boundary[1] += r.v * r.v;
        self.boundary[2] += r.theta * r.theta;
        if let Some(p) = r.p {
            self.pressure_b += p * p;
        }
        self.n_boundary += 1;
    }

    pub(crate) fn finish(self) -> Result<ResidualBreakdown> {
        if self.n_domain == 0 || self.n_boundary == 0 {
            return Err(PinnError::Config("empty collocation set".into()));
        }
        let nd = self.n_domain as f64;
        let nb = self.n_boundary as f64;
        Ok(ResidualBreakdown::from_components(
            self.domain.map(|s| s / nd),
            self.boundary.map(|s| s / nb),
            self.spec.pressure_boundary.then(|| self.pressure_b / nb),
            self.spec.augmented.then(|| self.aug.map(|s| s / nd)),
        ))
    }
}

/// Breakdown of `problem` for any jet provider (a network, an analytic
/// solution, or a perturbed one).
pub fn evaluate_breakdown<F>(problem: &LossProblem, mut jet_at: F) -> Result<ResidualBreakdown>
where
    F: FnMut(Point2) -> Result<FieldJet2>,
{
    problem.check_nonempty()?;
    let mut acc = BreakdownAccumulator::new(problem);
    for s in &problem.domain {
        let jet = jet_at(s.point)?;
        acc.add_domain(&problem.domain_raw(&jet, &s.forcing));
    }
    for s in &problem.boundary {
        let jet = jet_at(s.point)?;
        acc.add_boundary(&problem.boundary_raw_with_pressure(&jet.values(), s));
    }
    acc.finish()
}

impl LossProblem {
    pub(crate) fn boundary_raw_with_pressure(&self, pred: &FieldState, s: &BoundarySample) -> BoundaryResiduals {
        let mut r = self.boundary_raw(pred, &s.target);
        if self.spec.pressure_boundary {
            r.p = Some(pred.p - s.pressure);
        }
        r
    }
}

//! Self-checks run by `thermopinn verify`: the manufactured solution must
//! zero every residual, and the analytic gradients and jets must agree with
//! central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{evaluate_jet, evaluate_loss, loss_gradient, FieldJet2, Point2};
use crate::error::Result;
use crate::net::{forward, init_parameters, Architecture, ParameterVector};
use crate::physics::{
    augmentation_residual_point, domain_residual_point, Beltrami, DomainSpec, ExactSolution, FlowParameters,
    LossProblem, LossSpec,
};
use crate::sampling::{hierarchical_datasets, latin_hypercube, test_grid, BoundaryPoint, CollocationSet, Dirichlet, Edge};

pub const MANUFACTURED_TOL: f64 = 1e-20;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const JET_FIRST_TOL: f64 = 1e-5;
pub const JET_SECOND_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;
/// Second differences lose `ε/h²` to rounding, so they use a wider step
/// with fourth-order stencils.
pub const FD_STEP_SECOND: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
        }
    }
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest of the seven squared domain and augmentation residuals of the
/// exact solution over `points`.
pub fn manufactured_residual_max(points: &[Point2], flow: &FlowParameters, solution: &dyn ExactSolution) -> f64 {
    points
        .iter()
        .map(|&p| {
            let jet = solution.exact_jet(p);
            let f = solution.forcing(p, flow);
            let d = domain_residual_point(&jet, flow, f.fb, f.f);
            let a = augmentation_residual_point(&jet, flow, f.div_fb);
            d.into_iter().chain(a).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Twelve LHS interior points and one boundary point per edge.
pub fn sixteen_point_set(rect: &DomainSpec, seed: u64) -> Result<CollocationSet> {
    let domain_points = latin_hypercube(12, rect, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let boundary_points = Edge::ALL
        .iter()
        .map(|&edge| BoundaryPoint {
            point: edge.point(rect, rng.gen::<f64>()),
            edge,
            target: Dirichlet::default(),
        })
        .collect();
    Ok(CollocationSet {
        domain_points,
        boundary_points,
        level: 0,
        seed,
    }
    .with_targets(&Beltrami))
}

/// Max relative difference between `loss_gradient` and central differences
/// of the loss.
pub fn gradient_check(arch: &Architecture, params: &ParameterVector, problem: &LossProblem, h: f64) -> Result<f64> {
    let (_, grad) = loss_gradient(arch, params, problem)?;
    let mut worst = 0.0f64;
    let mut x = params.as_slice().to_vec();
    for (i, &g) in grad.iter().enumerate() {
        let x0 = x[i];
        x[i] = x0 + h;
        let fp = evaluate_loss(arch, &ParameterVector::new(arch, x.clone())?, problem)?.r_total;
        x[i] = x0 - h;
        let fm = evaluate_loss(arch, &ParameterVector::new(arch, x.clone())?, problem)?.r_total;
        x[i] = x0;
        worst = worst.max(relative_error(g, (fp - fm) / (2.0 * h)));
    }
    Ok(worst)
}

/// Max relative differences `(first, second)` between jets and central
/// differences of `forward` at `point`, with steps `h1` and `h2`.
pub fn jet_check(
    arch: &Architecture,
    params: &ParameterVector,
    point: Point2,
    h1: f64,
    h2: f64,
) -> Result<(f64, f64)> {
    let jet: FieldJet2 = evaluate_jet(arch, params, point)?;
    let f = |dx: f64, dy: f64| -> Result<[f64; 4]> {
        Ok(forward(arch, params, Point2::new(point.x + dx, point.y + dy))?.as_array())
    };
    let (xp, xm, yp, ym) = (f(h1, 0.0)?, f(-h1, 0.0)?, f(0.0, h1)?, f(0.0, -h1)?);
    let mut first = 0.0f64;
    for (k, j) in jet.fields().iter().enumerate() {
        let dx = (xp[k] - xm[k]) / (2.0 * h1);
        let dy = (yp[k] - ym[k]) / (2.0 * h1);
        first = first.max(relative_error(j.dx, dx)).max(relative_error(j.dy, dy));
    }
    // Fourth-order stencils keep truncation error far below rounding error.
    let h = h2;
    let at = |i: i32, j: i32| f(f64::from(i) * h, f64::from(j) * h);
    let c = at(0, 0)?;
    let (xp, xm, xp2, xm2) = (at(1, 0)?, at(-1, 0)?, at(2, 0)?, at(-2, 0)?);
    let (yp, ym, yp2, ym2) = (at(0, 1)?, at(0, -1)?, at(0, 2)?, at(0, -2)?);
    let (pp, pm, mp, mm) = (at(1, 1)?, at(1, -1)?, at(-1, 1)?, at(-1, -1)?);
    let (pp2, pm2, mp2, mm2) = (at(2, 2)?, at(2, -2)?, at(-2, 2)?, at(-2, -2)?);
    let second_diff = |p2: f64, p1: f64, c: f64, m1: f64, m2: f64| (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
    let mut second = 0.0f64;
    for (k, j) in jet.fields().iter().enumerate() {
        let dxx = second_diff(xp2[k], xp[k], c[k], xm[k], xm2[k]);
        let dyy = second_diff(yp2[k], yp[k], c[k], ym[k], ym2[k]);
        let d1 = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h);
        let d2 = (pp2[k] - pm2[k] - mp2[k] + mm2[k]) / (16.0 * h * h);
        let dxy = (4.0 * d1 - d2) / 3.0;
        second = second
            .max(relative_error(j.dxx, dxx))
            .max(relative_error(j.dxy, dxy))
            .max(relative_error(j.dyy, dyy));
    }
    Ok((first, second))
}

/// Run all checks.
pub fn verify(seed: u64) -> Result<Vec<Check>> {
    let rect = DomainSpec::default();
    let mut checks = Vec::new();

    let flows = [
        FlowParameters::default(),
        FlowParameters {
            g: [0.3, -9.8],
            ..FlowParameters::default().with_reynolds(10.0)
        },
    ];
    let sets = hierarchical_datasets(8, &rect, seed, &Beltrami)?;
    let largest = sets.last().expect("eight levels");
    let mut points: Vec<Point2> = largest.domain_points.clone();
    points.extend(largest.boundary_points.iter().map(|b| b.point));
    let grid = test_grid(&rect, 100)?;
    for (i, flow) in flows.iter().enumerate() {
        checks.push(Check::new(
            format!("manufactured residuals, {} collocation points, flow {i}", points.len()),
            manufactured_residual_max(&points, flow, &Beltrami),
            MANUFACTURED_TOL,
        ));
        checks.push(Check::new(
            format!("manufactured residuals, 100x100 grid, flow {i}"),
            manufactured_residual_max(&grid, flow, &Beltrami),
            MANUFACTURED_TOL,
        ));
    }

    let small: Architecture = "2-8-8-4".parse()?;
    let set = sixteen_point_set(&rect, seed)?;
    let params = init_parameters(&small, seed);
    for augmented in [true, false] {
        let spec = LossSpec {
            augmented,
            pressure_boundary: false,
        };
        let problem = LossProblem::new(&set, FlowParameters::default(), &Beltrami, spec)?;
        let label = if augmented { "augmented" } else { "bare" };
        checks.push(Check::new(
            format!("loss gradient vs central differences ({label})"),
            gradient_check(&small, &params, &problem, FD_STEP)?,
            GRADIENT_TOL,
        ));
    }

    let arch: Architecture = "2-32-32-4".parse()?;
    let params = init_parameters(&arch, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let p = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (a, b) = jet_check(&arch, &params, p, FD_STEP, FD_STEP_SECOND)?;
        first = first.max(a);
        second = second.max(b);
    }
    checks.push(Check::new("jet first derivatives vs central differences", first, JET_FIRST_TOL));
    checks.push(Check::new("jet second derivatives vs central differences", second, JET_SECOND_TOL));
    Ok(checks)
}

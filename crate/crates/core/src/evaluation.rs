//! Error norms against the exact solution and log-log convergence fits.
//!
//! All norms are discrete: maxima and root-mean-squares over a fixed grid,
//! with no quadrature weighting.

use serde::{Deserialize, Serialize};

use crate::autodiff::{evaluate_jets, FieldJet2, Jet, Point2};
use crate::error::{PinnError, Result};
use crate::net::{Architecture, ParameterVector};
use crate::physics::{
    BoundarySample, DomainSample, DomainSpec, ExactSolution, FlowParameters, LossProblem, LossSpec,
};
use crate::sampling::{split_grid, test_grid, Dirichlet};

pub const FIELD_NAMES: [&str; 4] = ["u", "v", "p", "theta"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldErrors {
    pub w0_inf: f64,
    pub w1_inf: f64,
    pub w2_inf: f64,
    pub l2: f64,
}

impl FieldErrors {
    pub fn w_inf(&self, k: usize) -> f64 {
        match k {
            0 => self.w0_inf,
            1 => self.w1_inf,
            _ => self.w2_inf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_per_side: usize,
    pub domain: DomainSpec,
}

/// Per-field `W^{k,∞}` (k = 0, 1, 2) and RMS errors on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub u: FieldErrors,
    pub v: FieldErrors,
    pub p: FieldErrors,
    pub theta: FieldErrors,
    pub grid: GridMeta,
}

impl ErrorReport {
    pub fn fields(&self) -> [FieldErrors; 4] {
        [self.u, self.v, self.p, self.theta]
    }
}

/// Seminorm contributions `|D^α e|` for `|α| = 0, 1, 2` at one point.
fn seminorms(e: &Jet) -> [f64; 3] {
    [
        e.value.abs(),
        e.dx.abs().max(e.dy.abs()),
        e.dxx.abs().max(e.dxy.abs()).max(e.dyy.abs()),
    ]
}

/// Per field, `[W^{0,∞}, W^{1,∞}, W^{2,∞}]` of `exact - predicted`.
pub fn sobolev_from_jets(exact: &[FieldJet2], predicted: &[FieldJet2]) -> Result<[[f64; 3]; 4]> {
    if exact.len() != predicted.len() {
        return Err(PinnError::Argument(format!(
            "exact and predicted jets differ in length ({} vs {})",
            exact.len(),
            predicted.len()
        )));
    }
    let mut semi = [[0.0f64; 3]; 4];
    for (e, p) in exact.iter().zip(predicted) {
        for (f, (ef, pf)) in e.fields().iter().zip(p.fields()).enumerate() {
            let s = seminorms(&(*ef - pf));
            for m in 0..3 {
                semi[f][m] = semi[f][m].max(s[m]);
            }
        }
    }
    Ok(semi.map(|s| [s[0], s[0].max(s[1]), s[0].max(s[1]).max(s[2])]))
}

/// Per-field RMS of `exact - predicted` values.
pub fn l2_from_jets(exact: &[FieldJet2], predicted: &[FieldJet2]) -> Result<[f64; 4]> {
    if exact.len() != predicted.len() || exact.is_empty() {
        return Err(PinnError::Argument("need equally many, nonempty jets".into()));
    }
    let mut sums = [0.0; 4];
    for (e, p) in exact.iter().zip(predicted) {
        let (e, p) = (e.values().as_array(), p.values().as_array());
        for f in 0..4 {
            sums[f] += (e[f] - p[f]).powi(2);
        }
    }
    Ok(sums.map(|s| (s / exact.len() as f64).sqrt()))
}

fn exact_jets(grid: &[Point2], solution: &dyn ExactSolution) -> Vec<FieldJet2> {
    grid.iter().map(|&p| solution.exact_jet(p)).collect()
}

/// Per-field `W^{k,∞}` error of the network on `grid`.
pub fn sobolev_error(
    arch: &Architecture,
    params: &ParameterVector,
    grid: &[Point2],
    k: usize,
    solution: &dyn ExactSolution,
) -> Result<[f64; 4]> {
    if k > 2 {
        return Err(PinnError::Argument(format!("Sobolev order {k} exceeds 2")));
    }
    let predicted = evaluate_jets(arch, params, grid)?;
    let all = sobolev_from_jets(&exact_jets(grid, solution), &predicted)?;
    Ok(all.map(|w| w[k]))
}

/// Per-field RMS error of the network on `grid`.
pub fn l2_error(
    arch: &Architecture,
    params: &ParameterVector,
    grid: &[Point2],
    solution: &dyn ExactSolution,
) -> Result<[f64; 4]> {
    let predicted = evaluate_jets(arch, params, grid)?;
    l2_from_jets(&exact_jets(grid, solution), &predicted)
}

/// Pointwise `|exact - predicted|` per grid point, `[u, v, p, θ]`.
pub fn error_field(
    arch: &Architecture,
    params: &ParameterVector,
    grid: &[Point2],
    solution: &dyn ExactSolution,
) -> Result<Vec<[f64; 4]>> {
    let predicted = evaluate_jets(arch, params, grid)?;
    Ok(grid
        .iter()
        .zip(&predicted)
        .map(|(&pt, pred)| {
            let e = solution.exact(pt).as_array();
            let p = pred.values().as_array();
            [0, 1, 2, 3].map(|f| (e[f] - p[f]).abs())
        })
        .collect())
}

/// Full error report on the `n × n` test grid over `rect`.
pub fn error_report(
    arch: &Architecture,
    params: &ParameterVector,
    rect: &DomainSpec,
    n_per_side: usize,
    solution: &dyn ExactSolution,
) -> Result<ErrorReport> {
    let grid = test_grid(rect, n_per_side)?;
    let predicted = evaluate_jets(arch, params, &grid)?;
    report_from_jets(&exact_jets(&grid, solution), &predicted, GridMeta {
        n_per_side,
        domain: *rect,
    })
}

pub fn report_from_jets(exact: &[FieldJet2], predicted: &[FieldJet2], grid: GridMeta) -> Result<ErrorReport> {
    let w = sobolev_from_jets(exact, predicted)?;
    let l2 = l2_from_jets(exact, predicted)?;
    let f = |i: usize| FieldErrors {
        w0_inf: w[i][0],
        w1_inf: w[i][1],
        w2_inf: w[i][2],
        l2: l2[i],
    };
    Ok(ErrorReport {
        u: f(0),
        v: f(1),
        p: f(2),
        theta: f(3),
        grid,
    })
}

/// Residual problem on unseen grid points: interior points carry forcing,
/// boundary points carry exact Dirichlet data. No augmentation.
pub fn generalization_problem(
    domain_points: &[Point2],
    boundary_points: &[Point2],
    flow: FlowParameters,
    solution: &dyn ExactSolution,
) -> Result<LossProblem> {
    let domain = domain_points
        .iter()
        .map(|&point| DomainSample {
            point,
            forcing: solution.forcing(point, &flow),
        })
        .collect();
    let boundary = boundary_points
        .iter()
        .map(|&point| BoundarySample {
            point,
            target: Dirichlet::from_state(&solution.exact(point)),
            pressure: 0.0,
        })
        .collect();
    LossProblem::from_samples(
        domain,
        boundary,
        flow,
        LossSpec {
            augmented: false,
            pressure_boundary: false,
        },
    )
}

/// Mean-squared domain plus boundary residual on unseen points.
pub fn estimate_generalization_error(
    arch: &Architecture,
    params: &ParameterVector,
    domain_points: &[Point2],
    boundary_points: &[Point2],
    flow: FlowParameters,
    solution: &dyn ExactSolution,
) -> Result<f64> {
    let problem = generalization_problem(domain_points, boundary_points, flow, solution)?;
    Ok(crate::autodiff::evaluate_loss(arch, params, &problem)?.r_total)
}

/// [`estimate_generalization_error`] on the interior and boundary of the
/// `n × n` grid over `rect`.
pub fn generalization_on_grid(
    arch: &Architecture,
    params: &ParameterVector,
    rect: &DomainSpec,
    n_per_side: usize,
    flow: FlowParameters,
    solution: &dyn ExactSolution,
) -> Result<f64> {
    let (interior, boundary) = split_grid(rect, n_per_side)?;
    let boundary: Vec<Point2> = boundary.into_iter().map(|(p, _)| p).collect();
    estimate_generalization_error(arch, params, &interior, &boundary, flow, solution)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    TrainingError,
    CollocationCount,
}

/// Least-squares line through `(log10 a, log10 e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub abscissa: AbscissaKind,
    /// `slope` for a training-error abscissa, `-slope` for a collocation
    /// count, so a positive rate always means the error decreases.
    pub rate: f64,
    pub n_points: usize,
}

pub fn fit_convergence(points: &[(f64, f64)], abscissa: AbscissaKind) -> Result<ConvergenceFit> {
    if points.len() < 2 {
        return Err(PinnError::Argument(format!(
            "a convergence fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(bad) = points.iter().find(|(a, e)| !(*a > 0.0 && *e > 0.0 && a.is_finite() && e.is_finite())) {
        return Err(PinnError::Argument(format!(
            "convergence fit needs positive finite values, got {bad:?}"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PinnError::Argument("abscissas must not all be equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let rate = match abscissa {
        AbscissaKind::TrainingError => slope,
        AbscissaKind::CollocationCount => -slope,
    };
    Ok(ConvergenceFit {
        slope,
        intercept,
        r_squared,
        abscissa,
        rate,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{beltrami_exact_jet, Beltrami};
    use proptest::prelude::*;

    fn grid() -> Vec<Point2> {
        test_grid(&DomainSpec::default(), 25).unwrap()
    }

    fn exact(g: &[Point2]) -> Vec<FieldJet2> {
        g.iter().map(|&p| beltrami_exact_jet(p)).collect()
    }

    #[test]
    fn exact_prediction_has_zero_error() {
        let g = grid();
        let e = exact(&g);
        assert_eq!(sobolev_from_jets(&e, &e).unwrap(), [[0.0; 3]; 4]);
        assert_eq!(l2_from_jets(&e, &e).unwrap(), [0.0; 4]);
    }

    #[test]
    fn constant_offset_on_theta() {
        let g = grid();
        let e = exact(&g);
        let mut pred = e.clone();
        pred.iter_mut().for_each(|j| j.theta.value += 0.1);
        let w = sobolev_from_jets(&e, &pred).unwrap();
        let l2 = l2_from_jets(&e, &pred).unwrap();
        for k in 0..3 {
            assert!((w[3][k] - 0.1).abs() < 1e-15);
            assert_eq!((w[0][k], w[1][k], w[2][k]), (0.0, 0.0, 0.0));
        }
        assert!((l2[3] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn derivative_spike_shows_in_w1_only_from_first_order() {
        let g = grid();
        let e = exact(&g);
        let mut pred = e.clone();
        pred[17].u.dx += 0.3;
        let w = sobolev_from_jets(&e, &pred).unwrap();
        assert_eq!(w[0][0], 0.0);
        assert!((w[0][1] - 0.3).abs() < 1e-15);
        assert!((w[0][2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn linear_offset_rms_on_test_grid() {
        let g = test_grid(&DomainSpec::default(), 100).unwrap();
        let e = exact(&g);
        let mut pred = e.clone();
        for (j, p) in pred.iter_mut().zip(&g) {
            j.theta.value += 0.1 * p.x;
        }
        let l2 = l2_from_jets(&e, &pred).unwrap();
        // Direct-summation oracle: mean of x² over the 100 grid abscissas.
        let mean_x2: f64 = (0..100)
            .map(|i| (-1.0 + 2.0 * i as f64 / 99.0).powi(2))
            .sum::<f64>()
            / 100.0;
        assert!((l2[3] - 0.1 * mean_x2.sqrt()).abs() < 1e-12);
        // Continuous limit 0.1/sqrt(3); the discrete grid sits slightly above it.
        assert!((l2[3] - 0.0578).abs() < 1e-3);
    }

    #[test]
    fn error_field_matches_w0() {
        let arch: Architecture = "2-8-4".parse().unwrap();
        let params = crate::net::init_parameters(&arch, 4);
        let g = grid();
        let field = error_field(&arch, &params, &g, &Beltrami).unwrap();
        assert_eq!(field.len(), g.len());
        let w0 = sobolev_error(&arch, &params, &g, 0, &Beltrami).unwrap();
        for f in 0..4 {
            let max = field.iter().map(|e| e[f]).fold(0.0, f64::max);
            assert_eq!(max, w0[f]);
        }
    }

    #[test]
    fn fits_exact_power_laws() {
        let f = fit_convergence(&[(1e-1, 1e-1), (1e-2, 1e-2), (1e-3, 1e-3)], AbscissaKind::TrainingError).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);

        let f = fit_convergence(&[(12.0, 1.2e-1), (24.0, 3e-2), (48.0, 7.5e-3)], AbscissaKind::CollocationCount)
            .unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);

        assert!(fit_convergence(&[(1.0, 1.0)], AbscissaKind::TrainingError).is_err());
        assert!(fit_convergence(&[(1.0, 1.0), (0.0, 2.0)], AbscissaKind::TrainingError).is_err());
    }

    proptest! {
        #[test]
        fn power_law_slopes_are_recovered(rate in -3.0f64..3.0, c in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2, 1e-1].iter().map(|&a| (a, c * f64::powf(a, rate))).collect();
            let f = fit_convergence(&pts, AbscissaKind::TrainingError).unwrap();
            prop_assert!((f.slope - rate).abs() < 1e-12);
            prop_assert!((f.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_are_ordered() {
        let arch: Architecture = "2-16-4".parse().unwrap();
        let params = crate::net::init_parameters(&arch, 2);
        let r = error_report(&arch, &params, &DomainSpec::default(), 20, &Beltrami).unwrap();
        for f in r.fields() {
            assert!(f.w0_inf <= f.w1_inf && f.w1_inf <= f.w2_inf);
            assert!(f.l2 <= f.w0_inf);
        }
    }

    #[test]
    fn generalization_error_vanishes_for_exact_solution() {
        let (interior, boundary) = split_grid(&DomainSpec::default(), 30).unwrap();
        let boundary: Vec<Point2> = boundary.into_iter().map(|(p, _)| p).collect();
        let problem = generalization_problem(&interior, &boundary, FlowParameters::default(), &Beltrami).unwrap();
        let bd = crate::physics::evaluate_breakdown(&problem, |p| Ok(beltrami_exact_jet(p))).unwrap();
        assert!(bd.r_total < 1e-20);
    }
}

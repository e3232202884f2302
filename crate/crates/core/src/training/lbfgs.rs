//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Objective value and gradient at a point, plus caller payload.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub value: f64,
    pub grad: Vec<f64>,
    pub extra: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    pub history: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_evals: usize,
    pub grad_tol: f64,
    pub max_iterations: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 20,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 25,
            grad_tol: 1e-10,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LbfgsStatus {
    GradientTolerance,
    ValueThreshold,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

/// Outcome of one accepted iteration.
#[derive(Debug, Clone)]
pub struct LbfgsStep<T> {
    pub x: Vec<f64>,
    pub eval: Evaluation<T>,
    pub evaluations: usize,
}

/// Line search could not satisfy the Wolfe conditions. `best` carries the
/// lowest point found with a value below the start, if any.
#[derive(Debug, Clone)]
pub struct LineSearchFailure<T> {
    pub best: Option<LbfgsStep<T>>,
    pub evaluations: usize,
}

/// Curvature pairs of the limited-memory inverse Hessian.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    config: LbfgsConfig,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone)]
struct Probe<T> {
    alpha: f64,
    value: f64,
    slope: f64,
    point: Option<(Vec<f64>, Evaluation<T>)>,
}

impl Lbfgs {
    pub fn new(config: LbfgsConfig) -> Self {
        Lbfgs {
            config,
            pairs: VecDeque::with_capacity(config.history),
        }
    }

    pub fn config(&self) -> &LbfgsConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    /// Two-loop recursion: `-H g` for the current inverse-Hessian estimate.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }

    /// One iteration from `x` (where `current` was evaluated). `f` returns
    /// `None` when the objective cannot be evaluated, which the line search
    /// treats as an infinite value.
    pub fn step<T, F>(
        &mut self,
        x: &[f64],
        current: &Evaluation<T>,
        f: &mut F,
    ) -> Result<LbfgsStep<T>, LineSearchFailure<T>>
    where
        T: Clone,
        F: FnMut(&[f64]) -> Option<Evaluation<T>>,
    {
        let mut d = self.direction(&current.grad);
        let mut slope = dot(&d, &current.grad);
        if !(slope < 0.0) || !slope.is_finite() {
            self.reset();
            d = current.grad.iter().map(|g| -g).collect();
            slope = dot(&d, &current.grad);
        }
        let alpha0 = if self.pairs.is_empty() {
            (1.0 / norm(&current.grad)).min(1.0)
        } else {
            1.0
        };
        let result = self.line_search(x, current, &d, slope, alpha0, f);
        if let Ok(step) = &result {
            let s: Vec<f64> = step.x.iter().zip(x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = step.eval.grad.iter().zip(&current.grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > f64::EPSILON * dot(&y, &y) && sy.is_finite() {
                if self.pairs.len() == self.config.history {
                    self.pairs.pop_front();
                }
                self.pairs.push_back((s, y, 1.0 / sy));
            }
        }
        result
    }

    fn line_search<T, F>(
        &self,
        x: &[f64],
        current: &Evaluation<T>,
        d: &[f64],
        slope0: f64,
        alpha0: f64,
        f: &mut F,
    ) -> Result<LbfgsStep<T>, LineSearchFailure<T>>
    where
        T: Clone,
        F: FnMut(&[f64]) -> Option<Evaluation<T>>,
    {
        let c1 = self.config.c1;
        let c2 = self.config.c2;
        let f0 = current.value;
        let max_evals = self.config.max_line_search_evals.max(2);
        let mut evals = 0usize;
        let mut best: Option<LbfgsStep<T>> = None;

        let mut probe = |alpha: f64, evals: &mut usize, best: &mut Option<LbfgsStep<T>>| -> Probe<T> {
            *evals += 1;
            let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
            match f(&xa) {
                Some(e) if e.value.is_finite() => {
                    let slope = dot(&e.grad, d);
                    if e.value < f0 && best.as_ref().is_none_or(|b| e.value < b.eval.value) {
                        *best = Some(LbfgsStep {
                            x: xa.clone(),
                            eval: e.clone(),
                            evaluations: 0,
                        });
                    }
                    Probe {
                        alpha,
                        value: e.value,
                        slope,
                        point: Some((xa, e)),
                    }
                }
                _ => Probe {
                    alpha,
                    value: f64::INFINITY,
                    slope: f64::NAN,
                    point: None,
                },
            }
        };
        let accept = |p: Probe<T>, evals: usize| {
            let (x, eval) = p.point.expect("accepted probe is finite");
            LbfgsStep {
                x,
                eval,
                evaluations: evals,
            }
        };

        let mut prev = Probe {
            alpha: 0.0,
            value: f0,
            slope: slope0,
            point: None,
        };
        let mut alpha = alpha0;
        let (mut lo, mut hi);
        let mut first = true;
        loop {
            let cur = probe(alpha, &mut evals, &mut best);
            if cur.value > f0 + c1 * cur.alpha * slope0 || (!first && cur.value >= prev.value) {
                lo = prev;
                hi = cur;
                break;
            }
            if cur.slope.abs() <= -c2 * slope0 {
                return Ok(accept(cur, evals));
            }
            if cur.slope >= 0.0 {
                lo = cur;
                hi = prev;
                break;
            }
            if evals >= max_evals {
                return Err(LineSearchFailure {
                    best: best.map(|b| LbfgsStep { evaluations: evals, ..b }),
                    evaluations: evals,
                });
            }
            first = false;
            prev = cur;
            alpha *= 2.0;
        }

        // zoom: lo satisfies sufficient decrease with the lowest value so far,
        // and the interval [lo, hi] brackets a Wolfe point.
        while evals < max_evals {
            let a = interpolate(&lo, &hi);
            let cur = probe(a, &mut evals, &mut best);
            if cur.value > f0 + c1 * cur.alpha * slope0 || cur.value >= lo.value {
                hi = cur;
            } else {
                if cur.slope.abs() <= -c2 * slope0 {
                    return Ok(accept(cur, evals));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
            if (hi.alpha - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
                break;
            }
        }
        Err(LineSearchFailure {
            best: best.map(|b| LbfgsStep { evaluations: evals, ..b }),
            evaluations: evals,
        })
    }
}

/// Safeguarded cubic interpolation of the minimizer inside `[lo, hi]`,
/// falling back to bisection.
fn interpolate<T>(lo: &Probe<T>, hi: &Probe<T>) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !(hi.value.is_finite() && hi.slope.is_finite() && lo.slope.is_finite()) {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        mid
    }
}

/// Minimize `f` from `x0`. Stops on gradient norm, on `value_threshold`
/// (when given), on the iteration cap, or on line-search failure, in which
/// case the best point seen is returned.
pub fn lbfgs_minimize<F>(mut f: F, x0: Vec<f64>, config: LbfgsConfig, value_threshold: Option<f64>) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval_fn = |x: &[f64]| {
        let (value, grad) = f(x);
        Some(Evaluation {
            value,
            grad,
            extra: (),
        })
    };
    let mut x = x0;
    let mut current = eval_fn(&x).unwrap();
    let mut evaluations = 1;
    let mut solver = Lbfgs::new(config);
    let mut iterations = 0;
    let status = loop {
        if norm(&current.grad) <= config.grad_tol {
            break LbfgsStatus::GradientTolerance;
        }
        if value_threshold.is_some_and(|t| current.value <= t) {
            break LbfgsStatus::ValueThreshold;
        }
        if iterations >= config.max_iterations {
            break LbfgsStatus::MaxIterations;
        }
        match solver.step(&x, &current, &mut eval_fn) {
            Ok(step) => {
                evaluations += step.evaluations;
                x = step.x;
                current = step.eval;
                iterations += 1;
            }
            Err(fail) => {
                evaluations += fail.evaluations;
                if let Some(best) = fail.best {
                    x = best.x;
                    current = best.eval;
                    iterations += 1;
                }
                break LbfgsStatus::LineSearchFailed;
            }
        }
    };
    LbfgsResult {
        grad_norm: norm(&current.grad),
        value: current.value,
        x,
        iterations,
        evaluations,
        status,
    }
}

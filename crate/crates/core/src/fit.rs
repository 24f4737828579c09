//! Least-squares fits of exponential decays (Levenberg-Marquardt).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const PARAM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// A e^(−t/τ) [+ C]
    Exponential { offset: bool },
    /// f e^(−t/τ₁) + (1 − f) e^(−t/τ₂), τ₁ < τ₂
    DoubleExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub names: Vec<&'static str>,
    pub parameters: Vec<f64>,
    /// 1σ errors from the Jacobian at the optimum.
    pub std_errors: Vec<f64>,
    pub residual: f64,
    /// Residual at the starting point.
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Double exponential with τ₁ and τ₂ within 10% of each other.
    pub degenerate: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.parameters[i])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| *n == name).map(|i| self.std_errors[i])
    }
}

/// A model with an analytic Jacobian.
trait Model {
    fn eval(&self, t: f64, p: &[f64]) -> f64;
    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]);
    /// Whether `p` lies in the model's domain.
    fn admissible(&self, p: &[f64]) -> bool;
}

struct SingleExp {
    offset: bool,
}

impl Model for SingleExp {
    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        let base = p[0] * (-t / p[1]).exp();
        if self.offset { base + p[2] } else { base }
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e = (-t / p[1]).exp();
        out[0] = e;
        out[1] = p[0] * e * t / (p[1] * p[1]);
        if self.offset {
            out[2] = 1.0;
        }
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p.iter().all(|v| v.is_finite())
    }
}

struct DoubleExp;

impl Model for DoubleExp {
    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-t / p[1]).exp() + (1.0 - p[0]) * (-t / p[2]).exp()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let e1 = (-t / p[1]).exp();
        let e2 = (-t / p[2]).exp();
        out[0] = e1 - e2;
        out[1] = p[0] * e1 * t / (p[1] * p[1]);
        out[2] = (1.0 - p[0]) * e2 * t / (p[2] * p[2]);
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p[2] > 0.0 && p.iter().all(|v| v.is_finite())
    }
}

struct Outcome {
    params: Vec<f64>,
    residual: f64,
    initial_residual: f64,
    iterations: usize,
    converged: bool,
    jacobian: DMatrix<f64>,
}

fn residual_sum(model: &dyn Model, t: &[f64], y: &[f64], w: &[f64], p: &[f64]) -> f64 {
    t.iter()
        .zip(y)
        .zip(w)
        .map(|((&t, &y), &w)| w * (y - model.eval(t, p)).powi(2))
        .sum()
}

fn levenberg_marquardt(model: &dyn Model, t: &[f64], y: &[f64], w: &[f64], start: Vec<f64>) -> Outcome {
    let m = t.len();
    let n = start.len();
    let mut p = start;
    let mut rss = residual_sum(model, t, y, w, &p);
    let initial_residual = rss;
    let mut lambda = 1e-3;
    let mut grad = vec![0.0; n];
    let mut jac = DMatrix::zeros(m, n);
    let mut res = DVector::zeros(m);
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        for i in 0..m {
            let sw = w[i].sqrt();
            model.gradient(t[i], &p, &mut grad);
            for k in 0..n {
                jac[(i, k)] = sw * grad[k];
            }
            res[i] = sw * (y[i] - model.eval(t[i], &p));
        }
        if rss == 0.0 {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if model.admissible(&trial) {
                let trial_rss = residual_sum(model, t, y, w, &trial);
                if trial_rss <= rss {
                    small_step = p
                        .iter()
                        .zip(&trial)
                        .all(|(a, b)| (b - a).abs() <= PARAM_TOLERANCE * a.abs().max(1e-300));
                    p = trial;
                    rss = trial_rss;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted || small_step {
            // No downhill step left, or the step is below tolerance.
            converged = true;
            break;
        }
    }
    // Jacobian at the final point for the error estimate.
    for i in 0..m {
        let sw = w[i].sqrt();
        model.gradient(t[i], &p, &mut grad);
        for k in 0..n {
            jac[(i, k)] = sw * grad[k];
        }
    }
    Outcome { params: p, residual: rss, initial_residual, iterations, converged, jacobian: jac }
}

fn standard_errors(jac: &DMatrix<f64>, rss: f64, m: usize) -> Vec<f64> {
    let n = jac.ncols();
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = rss / dof;
    match (jac.transpose() * jac).try_inverse() {
        Some(cov) => (0..n).map(|k| (cov[(k, k)] * s2).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; n],
    }
}

fn validate_points(points: &[(f64, f64)], weights: Option<&[f64]>, min_points: usize) -> Result<Vec<f64>> {
    if points.len() < min_points {
        return Err(Error::invalid(format!(
            "need at least {min_points} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(t, y)| !(t.is_finite() && y.is_finite()) || *t < 0.0) {
        return Err(Error::invalid("points must be finite with t >= 0"));
    }
    match weights {
        Some(w) if w.len() != points.len() => Err(Error::invalid("weights and points differ in length")),
        Some(w) if w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) => {
            Err(Error::invalid("weights must be finite and non-negative"))
        }
        Some(w) => Ok(w.to_vec()),
        None => Ok(vec![1.0; points.len()]),
    }
}

/// Weighted straight-line fit of ln y against t; returns (intercept, slope).
fn log_linear(t: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &w) in t.iter().zip(y).zip(w) {
        if y <= 0.0 || w == 0.0 {
            continue;
        }
        let ly = y.ln();
        sw += w;
        st += w * t;
        sy += w * ly;
        stt += w * t * t;
        sty += w * t * ly;
    }
    let det = sw * stt - st * st;
    if sw == 0.0 || det.abs() <= 1e-300 {
        return None;
    }
    let slope = (sw * sty - st * sy) / det;
    let intercept = (sy - slope * st) / sw;
    Some((intercept, slope))
}

/// Fits y = A e^(−t/τ) (plus a constant when `offset`), starting from a
/// log-linear regression.
pub fn fit_exponential(points: &[(f64, f64)], weights: Option<&[f64]>, offset: bool) -> Result<FitResult> {
    let w = validate_points(points, weights, 3)?;
    let (t, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    if y.iter().all(|&v| v <= 0.0) {
        return Err(Error::invalid("log-space initializer needs positive y values"));
    }
    let span = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    let (amp, tau) = match log_linear(&t, &y, &w) {
        Some((c, s)) if s < 0.0 => (c.exp(), -1.0 / s),
        _ => (y.iter().cloned().fold(f64::MIN, f64::max), span.max(1e-300)),
    };
    let mut start = vec![amp, tau];
    if offset {
        start.push(0.0);
    }
    let model = SingleExp { offset };
    let out = levenberg_marquardt(&model, &t, &y, &w, start);
    let std_errors = standard_errors(&out.jacobian, out.residual, t.len());
    let mut names = vec!["amplitude", "tau"];
    if offset {
        names.push("offset");
    }
    Ok(FitResult {
        model: FitModel::Exponential { offset },
        names,
        parameters: out.params,
        std_errors,
        residual: out.residual,
        initial_residual: out.initial_residual,
        iterations: out.iterations,
        converged: out.converged,
        degenerate: false,
    })
}

/// Fits f e^(−t/τ₁) + (1 − f) e^(−t/τ₂) from three starting points and keeps
/// the lowest residual (ties go to the earlier start). Components are
/// reordered so that τ₁ < τ₂.
pub fn fit_double_exponential(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<FitResult> {
    use rayon::prelude::*;

    let w = validate_points(points, weights, 6)?;
    let (t, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::invalid("points must span a positive time range"));
    }
    // Slow constant from the tail, fast constant from the head.
    let half: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= 0.5 * t_max).collect();
    let tail_tau = log_linear(
        &half.iter().map(|&i| t[i]).collect::<Vec<_>>(),
        &half.iter().map(|&i| y[i]).collect::<Vec<_>>(),
        &half.iter().map(|&i| w[i]).collect::<Vec<_>>(),
    )
    .and_then(|(_, s)| (s < 0.0).then(|| -1.0 / s))
    .unwrap_or(t_max);
    let starts = [
        vec![0.5, 0.1 * tail_tau, tail_tau],
        vec![0.3, 0.05 * t_max, 2.0 * t_max],
        vec![0.7, 0.2 * t_max, 0.8 * t_max],
    ];
    let model = DoubleExp;
    let outcomes: Vec<Outcome> = starts
        .par_iter()
        .map(|s| levenberg_marquardt(&model, &t, &y, &w, s.clone()))
        .collect();
    let best = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.residual.total_cmp(&b.residual).then(ia.cmp(ib)))
        .map(|(_, o)| o)
        .expect("three starts");

    let mut params = best.params.clone();
    let mut std_errors = standard_errors(&best.jacobian, best.residual, t.len());
    if params[1] > params[2] {
        params = vec![1.0 - params[0], params[2], params[1]];
        std_errors = vec![std_errors[0], std_errors[2], std_errors[1]];
    }
    let degenerate = (params[1] / params[2] - 1.0).abs() < 0.1;
    Ok(FitResult {
        model: FitModel::DoubleExponential,
        names: vec!["fast_fraction", "tau_fast", "tau_slow"],
        parameters: params,
        std_errors,
        residual: best.residual,
        initial_residual: best.initial_residual,
        iterations: best.iterations,
        converged: best.converged,
        degenerate,
    })
}

//! Bounded nonlinear least squares: a Nelder-Mead pass to find the basin,
//! then Levenberg-Marquardt with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub names: Vec<String>,
    pub init: Vec<f64>,
    /// Inclusive `(lower, upper)`; infinite ends are allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl Problem {
    pub fn unbounded(names: &[&str], init: &[f64]) -> Self {
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            init: init.to_vec(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); init.len()],
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.init.len();
        if n == 0 {
            return Err(Error::Empty("parameters"));
        }
        if self.names.len() != n || self.bounds.len() != n {
            return Err(Error::Precondition("names, init and bounds lengths differ".into()));
        }
        for ((name, &x), &(lo, hi)) in self.names.iter().zip(&self.init).zip(&self.bounds) {
            if !x.is_finite() {
                return Err(Error::Precondition(format!("initial {name} is not finite")));
            }
            if !(lo <= hi) {
                return Err(Error::Precondition(format!("bounds of {name} are empty")));
            }
            if x < lo || x > hi {
                return Err(Error::Precondition(format!(
                    "initial {name} = {x} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    /// Maximum number of residual evaluations.
    pub budget: usize,
    /// Initial simplex edge, relative to `|x|` (absolute when `x == 0`).
    pub initial_step: f64,
    /// Scale the covariance by the reduced chi-square.
    pub rescale_covariance: bool,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            budget: 5000,
            initial_step: 0.1,
            rescale_covariance: true,
            xtol: 1e-12,
            ftol: 1e-15,
        }
    }
}

/// Raw optimizer output in the problem's own coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub n_evaluations: usize,
    pub converged: bool,
    /// Residual norm of each accepted iterate; non-increasing.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

struct Objective<F> {
    f: F,
    evals: usize,
    m: usize,
    bounds: Vec<(f64, f64)>,
}

impl<F: FnMut(&[f64]) -> Result<Vec<f64>>> Objective<F> {
    /// `None` when `x` is out of bounds or the model fails there.
    fn eval(&mut self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        if x
            .iter()
            .zip(&self.bounds)
            .any(|(v, (lo, hi))| !v.is_finite() || v < lo || v > hi)
        {
            return None;
        }
        self.evals += 1;
        let r = (self.f)(x).ok()?;
        if r.len() != self.m || r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let s = r.iter().map(|v| v * v).sum();
        Some((r, s))
    }

    fn cost(&mut self, x: &[f64]) -> f64 {
        self.eval(x).map_or(f64::INFINITY, |(_, s)| s)
    }

    /// Forward differences, falling back to backward at an upper bound.
    fn jacobian(&mut self, x: &[f64], r: &[f64]) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut j = DMatrix::zeros(self.m, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = (1e-6 * x[k].abs()).max(1e-9);
            xp[k] = x[k] + h;
            let (rp, sign) = match self.eval(&xp) {
                Some((rp, _)) => (rp, 1.0),
                None => {
                    xp[k] = x[k] - h;
                    (self.eval(&xp)?.0, -1.0)
                }
            };
            for i in 0..self.m {
                j[(i, k)] = sign * (rp[i] - r[i]) / h;
            }
            xp[k] = x[k];
        }
        Some(j)
    }
}

fn clip(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> Result<Vec<f64>>>(
    obj: &mut Objective<F>,
    x0: &[f64],
    f0: f64,
    step: f64,
    max_evals: usize,
    history: &mut Vec<f64>,
) -> Vec<f64> {
    let n = x0.len();
    let mut simplex = vec![(x0.to_vec(), f0)];
    for k in 0..n {
        let mut x = x0.to_vec();
        let h = if x0[k] != 0.0 { step * x0[k].abs() } else { step };
        x[k] = x0[k] + h;
        if x[k] > obj.bounds[k].1 {
            x[k] = x0[k] - h;
        }
        let f = obj.cost(&x);
        simplex.push((x, f));
    }
    let by_cost = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    let start = obj.evals;
    loop {
        simplex.sort_by(by_cost);
        let best = simplex[0].1;
        if history.last().is_none_or(|&h| best.sqrt() < h) {
            history.push(best.sqrt());
        }
        let worst = simplex[n].1;
        let spread = worst - best;
        if obj.evals - start >= max_evals || (best.is_finite() && spread <= 1e-12 * best.abs() + 1e-300) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = obj.cost(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = obj.cost(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, f) in simplex.iter_mut().skip(1) {
                    for (v, b) in x.iter_mut().zip(&x_best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    *f = obj.cost(x);
                }
            }
        }
    }
    simplex.sort_by(by_cost);
    simplex.swap_remove(0).0
}

/// Covariance `(J^T J)^-1`, or `None` when `J^T J` is numerically singular.
fn inverse_normal_matrix(j: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let a = j.transpose() * j;
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(max > 0.0) || min <= 1e-13 * max {
        return None;
    }
    let inv_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let c = &eig.eigenvectors * inv_l * eig.eigenvectors.transpose();
    Some((&c + c.transpose()) * 0.5)
}

/// Minimizes `sum(residual(x)^2)` inside the bounds.
///
/// Residual failures at trial points are treated as infeasible; a failure at
/// the initial point is returned as the error.
pub fn optimize<F>(problem: &Problem, residual: F, opts: &OptimizeOptions) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    problem.validate()?;
    let n = problem.init.len();
    let mut f = residual;
    let r0 = f(&problem.init)?;
    let m = r0.len();
    if m < n {
        return Err(Error::NonIdentifiable(format!(
            "{m} residuals for {n} free parameters"
        )));
    }
    if r0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("residuals at the initial point are not finite".into()));
    }
    let mut obj = Objective {
        f,
        evals: 1,
        m,
        bounds: problem.bounds.clone(),
    };
    let s0: f64 = r0.iter().map(|v| v * v).sum();
    let mut history = Vec::new();
    let mut warnings = Vec::new();

    let nm_budget = (opts.budget / 2).min(200 * (n + 1));
    let mut x = nelder_mead(&mut obj, &problem.init, s0, opts.initial_step, nm_budget, &mut history);
    let (mut r, mut s) = obj.eval(&x).unwrap_or((r0, s0));
    if s > s0 {
        x = problem.init.clone();
    }

    let mut lambda = 1e-3;
    let mut converged = s == 0.0;
    'outer: while !converged {
        if obj.evals + n > opts.budget {
            break;
        }
        let Some(j) = obj.jacobian(&x, &r) else {
            warnings.push("Jacobian could not be evaluated".into());
            break;
        };
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        loop {
            if obj.evals >= opts.budget {
                break 'outer;
            }
            let mut damped = a.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-300);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    converged = true;
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            let mut x_new: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            clip(&mut x_new, &problem.bounds);
            if x_new == x {
                converged = true;
                break 'outer;
            }
            match obj.eval(&x_new) {
                Some((r_new, s_new)) if s_new < s => {
                    let small = x_new
                        .iter()
                        .zip(&x)
                        .all(|(a, b)| (a - b).abs() <= opts.xtol * (b.abs() + opts.xtol));
                    let flat = s - s_new <= opts.ftol * s;
                    x = x_new;
                    r = r_new;
                    s = s_new;
                    history.push(s.sqrt());
                    lambda = (lambda / 10.0).max(1e-12);
                    if small || flat || s == 0.0 {
                        converged = true;
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    if !converged {
        warnings.push(format!("evaluation budget of {} exhausted", opts.budget));
    }

    let covariance = match obj.jacobian(&x, &r) {
        Some(j) => match inverse_normal_matrix(&j) {
            Some(c) => {
                let scale = if opts.rescale_covariance && m > n {
                    s / (m - n) as f64
                } else {
                    1.0
                };
                Some(
                    (0..n)
                        .map(|i| (0..n).map(|k| c[(i, k)] * scale).collect())
                        .collect(),
                )
            }
            None => {
                warnings.push("J^T J is singular; uncertainties unavailable".into());
                None
            }
        },
        None => {
            warnings.push("Jacobian at the optimum could not be evaluated; uncertainties unavailable".into());
            None
        }
    };
    Ok(Solution {
        x,
        residuals: r,
        cost: s,
        covariance,
        n_evaluations: obj.evals,
        converged,
        history,
        warnings,
    })
}

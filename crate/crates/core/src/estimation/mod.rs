//! Least-squares estimation of device rates from simulated or measured data.
//!
//! Every fit works on `nbar` residuals weighted by the per-point sigma.
//! Positive rates are optimized as logarithms relative to their initial
//! guess and phases are optimized unconstrained, then wrapped.
//! Rates are reported in Hz, drive rates `U` in rad/s.

pub mod lorentzian;
pub mod optimize;
pub mod timedomain;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lorentzian::fit_lorentzian;
pub use optimize::{optimize, OptimizeOptions, Problem, Solution};
pub use timedomain::{fit_ramsey, fit_ring_up_ring_down, RamseyFit, RingUpFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    /// 1-sigma uncertainties; empty when the covariance is unavailable.
    pub sigmas: BTreeMap<String, f64>,
    /// Order of the rows and columns of `covariance`.
    pub free: Vec<String>,
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Norm of the weighted residual vector.
    pub residual_norm: f64,
    pub chi2: f64,
    pub dof: usize,
    pub n_evaluations: usize,
    pub converged: bool,
    pub fixed: BTreeMap<String, f64>,
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).or_else(|| self.fixed.get(name)).copied()
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof > 0 {
            self.chi2 / self.dof as f64
        } else {
            f64::NAN
        }
    }
}

/// Initial value of a parameter and whether it is held there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub value: f64,
    pub fixed: bool,
}

impl ParamSpec {
    pub fn free(value: f64) -> Self {
        Self { value, fixed: false }
    }

    pub fn fixed(value: f64) -> Self {
        Self { value, fixed: true }
    }
}

/// Coordinate the optimizer sees for a parameter `v` with initial value `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Coord {
    /// `v = v0 exp(q)`, `q` within `+-ln(1e6)`.
    Log,
    /// `v = v0 + scale q`.
    Linear { scale: f64 },
    /// `v = q`, reported wrapped to `(-pi, pi]`.
    Angle,
}

pub(crate) struct Param {
    pub name: &'static str,
    pub spec: ParamSpec,
    pub coord: Coord,
}

const LOG_RANGE: f64 = 13.815510557964274; // ln(1e6)

impl Param {
    fn value(&self, q: f64) -> f64 {
        let v0 = self.spec.value;
        match self.coord {
            Coord::Log => v0 * q.exp(),
            Coord::Linear { scale } => v0 + scale * q,
            Coord::Angle => q,
        }
    }

    fn derivative(&self, q: f64) -> f64 {
        match self.coord {
            Coord::Log => self.value(q),
            Coord::Linear { scale } => scale,
            Coord::Angle => 1.0,
        }
    }

    fn start(&self) -> f64 {
        match self.coord {
            Coord::Log | Coord::Linear { .. } => 0.0,
            Coord::Angle => self.spec.value,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self.coord {
            Coord::Log => (-LOG_RANGE, LOG_RANGE),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let w = phi - 2.0 * PI * ((phi + PI) / (2.0 * PI)).floor();
    // map [-pi, pi) onto (-pi, pi]
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Effective per-point sigma: uniform when all are zero, otherwise floored
/// at `1e-6` of the largest.
pub fn effective_sigma(sigma: &[f64]) -> Vec<f64> {
    let max = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    if max == 0.0 {
        vec![1.0; sigma.len()]
    } else {
        sigma.iter().map(|&s| s.max(1e-6 * max)).collect()
    }
}

/// Fits the free members of `params`; `model` receives all values (fixed
/// included) in declaration order and returns weighted residuals.
pub(crate) fn fit_params<F>(params: &[Param], mut model: F, opts: &OptimizeOptions) -> Result<FitResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    for p in params {
        if !p.spec.value.is_finite() {
            return Err(Error::InvalidParameter {
                name: p.name,
                reason: "initial value is not finite".into(),
            });
        }
        if p.coord == Coord::Log && !(p.spec.value > 0.0) && !p.spec.fixed {
            return Err(Error::InvalidParameter {
                name: p.name,
                reason: format!("initial value {} must be > 0", p.spec.value),
            });
        }
    }
    let free: Vec<usize> = (0..params.len()).filter(|&i| !params[i].spec.fixed).collect();
    let problem = Problem {
        names: free.iter().map(|&i| params[i].name.to_string()).collect(),
        init: free.iter().map(|&i| params[i].start()).collect(),
        bounds: free.iter().map(|&i| params[i].bounds()).collect(),
    };
    let values = |q: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = params.iter().map(|p| p.spec.value).collect();
        for (k, &i) in free.iter().enumerate() {
            v[i] = params[i].value(q[k]);
        }
        v
    };
    let sol = optimize(&problem, |q| model(&values(q)), opts)?;

    let mut warnings = sol.warnings.clone();
    for (k, &i) in free.iter().enumerate() {
        let p = &params[i];
        if p.coord == Coord::Log {
            if sol.x[k] <= -LOG_RANGE + 1e-6 {
                return Err(Error::BoundViolation(format!(
                    "{} collapsed towards zero ({:e})",
                    p.name,
                    p.value(sol.x[k])
                )));
            }
            if sol.x[k] >= LOG_RANGE - 1e-6 {
                warnings.push(format!("{} ran to its upper bound", p.name));
            }
        }
    }
    let all = values(&sol.x);
    let mut out_params = BTreeMap::new();
    let mut fixed = BTreeMap::new();
    for (p, &v) in params.iter().zip(&all) {
        let v = if p.coord == Coord::Angle { wrap_phase(v) } else { v };
        if p.spec.fixed {
            fixed.insert(p.name.to_string(), v);
        } else {
            out_params.insert(p.name.to_string(), v);
        }
    }
    let d: Vec<f64> = free
        .iter()
        .enumerate()
        .map(|(k, &i)| params[i].derivative(sol.x[k]))
        .collect();
    let covariance = sol.covariance.as_ref().map(|c| {
        (0..free.len())
            .map(|a| (0..free.len()).map(|b| c[a][b] * d[a] * d[b]).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    });
    let sigmas = covariance
        .as_ref()
        .map(|c| {
            free.iter()
                .enumerate()
                .map(|(k, &i)| (params[i].name.to_string(), c[k][k].max(0.0).sqrt()))
                .collect()
        })
        .unwrap_or_default();
    Ok(FitResult {
        params: out_params,
        sigmas,
        free: problem.names,
        covariance,
        residual_norm: sol.cost.sqrt(),
        chi2: sol.cost,
        dof: sol.residuals.len().saturating_sub(free.len()),
        n_evaluations: sol.n_evaluations,
        converged: sol.converged,
        fixed,
        history: sol.history,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phase_wrapping() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(0.3 + 4.0 * PI) - 0.3).abs() < 1e-12);
        assert!((wrap_phase(-0.3 - 2.0 * PI) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn sigma_floor() {
        assert_eq!(effective_sigma(&[0.0, 0.0]), vec![1.0, 1.0]);
        assert_eq!(effective_sigma(&[0.0, 2.0]), vec![2e-6, 2.0]);
    }

    #[test]
    fn log_coordinates_report_natural_sigmas() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| (-2.0 * x).exp() + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let params = [Param {
            name: "rate",
            spec: ParamSpec::free(1.0),
            coord: Coord::Log,
        }];
        let fit = fit_params(
            &params,
            |v| Ok(xs.iter().zip(&ys).map(|(x, y)| (-v[0] * x).exp() - y).collect()),
            &OptimizeOptions::default(),
        )
        .unwrap();
        let rate = fit.params["rate"];
        assert!((rate - 2.0).abs() < 0.05);
        let c = fit.covariance.as_ref().unwrap();
        assert!((fit.sigmas["rate"] - c[0][0].sqrt()).abs() < 1e-15);
        assert!(fit.sigmas["rate"] > 0.0);
    }

    #[test]
    fn fixed_parameters_are_not_fitted() {
        let params = [
            Param {
                name: "a",
                spec: ParamSpec::free(1.0),
                coord: Coord::Linear { scale: 1.0 },
            },
            Param {
                name: "b",
                spec: ParamSpec::fixed(5.0),
                coord: Coord::Linear { scale: 1.0 },
            },
        ];
        let fit = fit_params(&params, |v| Ok(vec![v[0] + v[1] - 7.0]), &OptimizeOptions::default()).unwrap();
        assert!((fit.params["a"] - 2.0).abs() < 1e-10);
        assert_eq!(fit.fixed["b"], 5.0);
        assert_eq!(fit.free, vec!["a".to_string()]);
    }

    #[test]
    fn collapse_to_zero_is_a_bound_violation() {
        let params = [Param {
            name: "kappa1",
            spec: ParamSpec::free(1.0),
            coord: Coord::Log,
        }];
        let r = fit_params(&params, |v| Ok(vec![v[0], 0.0]), &OptimizeOptions::default());
        assert!(matches!(r, Err(Error::BoundViolation(_))), "{r:?}");
    }
}

//! Fits of the time-domain protocols to numerical solutions.
//!
//! The optimizer runs on the moment equations, which are exact for `nbar`
//! of this linear model. With `verify` set the fitted parameters are
//! re-simulated with the density-matrix solver and the fit fails when the
//! two disagree by more than `1e-3` of the curve's peak.

use serde::{Deserialize, Serialize};

use crate::dispersive::DeviceParams;
use crate::error::{Error, Result};
use crate::protocols::{simulate_ramsey, simulate_ring_up_ring_down, ExperimentSeries, RamseyGrid, SimSettings};
use crate::pulses::RamseyMode;
use crate::units::hz_to_angular;

use super::{effective_sigma, fit_params, Coord, FitResult, OptimizeOptions, Param, ParamSpec};

pub const VERIFY_TOL: f64 = 1e-3;

/// Ring-up/ring-down fit setup. `u` in rad/s, rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingUpFit {
    pub t_d: f64,
    pub u: ParamSpec,
    pub kappa1: ParamSpec,
    pub kappa_phi: ParamSpec,
    pub verify: bool,
    pub options: OptimizeOptions,
}

impl RingUpFit {
    /// Free `U` and `kappa1`, `kappa_phi` held at zero.
    pub fn new(t_d: f64, u: f64, kappa1: f64) -> Self {
        Self {
            t_d,
            u: ParamSpec::free(u),
            kappa1: ParamSpec::free(kappa1),
            kappa_phi: ParamSpec::fixed(0.0),
            verify: true,
            options: OptimizeOptions::default(),
        }
    }
}

/// Ramsey fit setup. `u` in rad/s, rates in Hz, `phi0` in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    pub t_d: f64,
    pub u: ParamSpec,
    pub kappa1: ParamSpec,
    pub kappa_phi: ParamSpec,
    pub phi0: ParamSpec,
    pub mode: RamseyMode,
    pub verify: bool,
    pub options: OptimizeOptions,
}

impl RamseyFit {
    /// All four parameters free.
    pub fn new(t_d: f64, u: f64, kappa1: f64, kappa_phi: f64, phi0: f64, mode: RamseyMode) -> Self {
        Self {
            t_d,
            u: ParamSpec::free(u),
            kappa1: ParamSpec::free(kappa1),
            kappa_phi: ParamSpec::free(kappa_phi),
            phi0: ParamSpec::free(phi0),
            mode,
            verify: true,
            options: OptimizeOptions::default(),
        }
    }
}

fn device(kappa1: f64, kappa_phi: f64) -> DeviceParams {
    DeviceParams {
        kappa1,
        kappa_phi,
        ..DeviceParams::reference()
    }
}

fn rate_params(u: ParamSpec, kappa1: ParamSpec, kappa_phi: ParamSpec) -> Vec<Param> {
    vec![
        Param {
            name: "U",
            spec: u,
            coord: Coord::Log,
        },
        Param {
            name: "kappa1",
            spec: kappa1,
            coord: Coord::Log,
        },
        Param {
            name: "kappa_phi",
            spec: kappa_phi,
            coord: Coord::Log,
        },
    ]
}

fn check_fixed_rates(params: &[Param]) -> Result<()> {
    for p in params {
        if p.spec.fixed && p.coord == Coord::Log && !(p.spec.value >= 0.0) {
            return Err(Error::InvalidParameter {
                name: p.name,
                reason: format!("fixed value {} must be >= 0", p.spec.value),
            });
        }
    }
    Ok(())
}

fn verify(model: &[f64], full: &[f64]) -> Result<()> {
    let peak = model.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = model.iter().zip(full).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if worst > VERIFY_TOL * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::Verification(format!(
            "moment model and density-matrix solve differ by {:.3e} of the peak (limit {VERIFY_TOL:e})",
            worst / peak
        )));
    }
    Ok(())
}

/// Fits `U`, `kappa1` (and `kappa_phi` when freed) to a ring-up/ring-down series.
pub fn fit_ring_up_ring_down(series: &ExperimentSeries, setup: &RingUpFit) -> Result<FitResult> {
    if series.len() < 3 {
        return Err(Error::Precondition(format!(
            "ring-up/ring-down fit needs >= 3 points, got {}",
            series.len()
        )));
    }
    if !(setup.t_d > 0.0 && setup.t_d.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_d",
            reason: format!("drive length {} must be finite and > 0", setup.t_d),
        });
    }
    if series.axis.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Precondition("times must be finite and >= 0".into()));
    }
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series.axis[a].total_cmp(&series.axis[b]));
    let times: Vec<f64> = order.iter().map(|&i| series.axis[i]).collect();
    let data: Vec<f64> = order.iter().map(|&i| series.nbar[i]).collect();
    let sigma_all = effective_sigma(&series.sigma);
    let sigma: Vec<f64> = order.iter().map(|&i| sigma_all[i]).collect();

    let mut warnings = Vec::new();
    if !times.iter().any(|&t| t > 0.0 && t < setup.t_d) {
        warnings.push("no points inside the drive window: U is constrained only by the ring-down amplitude".into());
    }
    if !times.iter().any(|&t| t > setup.t_d) {
        warnings.push("no points after the drive: kappa1 is constrained only by the ring-up shape".into());
    }

    let params = rate_params(setup.u, setup.kappa1, setup.kappa_phi);
    check_fixed_rates(&params)?;
    let simulate = |v: &[f64], settings: &SimSettings| -> Result<Vec<f64>> {
        Ok(simulate_ring_up_ring_down(&device(v[1], v[2]), v[0], setup.t_d, &times, settings)?
            .output
            .nbar)
    };
    let mut fit = fit_params(
        &params,
        |v| {
            let model = simulate(v, &SimSettings::moments())?;
            Ok(model
                .iter()
                .zip(&data)
                .zip(&sigma)
                .map(|((m, d), s)| (m - d) / s)
                .collect())
        },
        &setup.options,
    )?;
    fit.warnings.extend(warnings);
    if setup.verify {
        let v = [fit.param("U").unwrap(), fit.param("kappa1").unwrap(), fit.param("kappa_phi").unwrap()];
        verify(&simulate(&v, &SimSettings::moments())?, &simulate(&v, &SimSettings::default())?)?;
    }
    Ok(fit)
}

/// Fits `U`, `kappa1`, `kappa_phi` and `phi0` jointly over a Ramsey grid.
pub fn fit_ramsey(grid: &RamseyGrid, setup: &RamseyFit) -> Result<FitResult> {
    if grid.is_empty() {
        return Err(Error::Empty("Ramsey grid"));
    }
    let mut distinct = grid.taus.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 && !setup.kappa1.fixed && !setup.kappa_phi.fixed {
        return Err(Error::NonIdentifiable(
            "a single delay cannot separate kappa1 from kappa_phi".into(),
        ));
    }
    let mut warnings = Vec::new();
    let mut phis = grid.phis.clone();
    phis.sort_by(f64::total_cmp);
    phis.dedup();
    let step = if phis.len() > 1 {
        (phis[phis.len() - 1] - phis[0]) / (phis.len() - 1) as f64
    } else {
        0.0
    };
    if phis.len() < 3 || phis[phis.len() - 1] - phis[0] + step < 2.0 * std::f64::consts::PI * (1.0 - 1e-9) {
        warnings.push("phase axis does not span a full period".to_string());
    }
    let coherence = hz_to_angular(setup.kappa1.value) / 2.0 + hz_to_angular(setup.kappa_phi.value) / 4.0;
    if coherence > 0.0 {
        let t = 1.0 / coherence;
        if distinct[0] > t || distinct[distinct.len() - 1] < t {
            warnings.push("delays do not straddle the coherence time".to_string());
        }
    }

    let mut params = rate_params(setup.u, setup.kappa1, setup.kappa_phi);
    params.push(Param {
        name: "phi0",
        spec: setup.phi0,
        coord: Coord::Angle,
    });
    check_fixed_rates(&params)?;
    let data: Vec<f64> = grid.nbar.iter().flatten().copied().collect();
    let sigma = effective_sigma(&grid.sigma.iter().flatten().copied().collect::<Vec<_>>());
    if data.len() != grid.len() || sigma.len() != grid.len() {
        return Err(Error::Precondition("grid values do not match its axes".into()));
    }
    let simulate = |v: &[f64], settings: &SimSettings| -> Result<Vec<f64>> {
        let run = simulate_ramsey(
            &device(v[1], v[2]),
            v[0],
            setup.t_d,
            &grid.taus,
            &grid.phis,
            v[3],
            setup.mode,
            settings,
        )?;
        Ok(run.output.nbar.into_iter().flatten().collect())
    };
    let mut fit = fit_params(
        &params,
        |v| {
            let model = simulate(v, &SimSettings::moments())?;
            Ok(model
                .iter()
                .zip(&data)
                .zip(&sigma)
                .map(|((m, d), s)| (m - d) / s)
                .collect())
        },
        &setup.options,
    )?;
    fit.warnings.extend(warnings);
    if setup.verify {
        let v = [
            fit.param("U").unwrap(),
            fit.param("kappa1").unwrap(),
            fit.param("kappa_phi").unwrap(),
            fit.param("phi0").unwrap(),
        ];
        verify(&simulate(&v, &SimSettings::moments())?, &simulate(&v, &SimSettings::default())?)?;
    }
    Ok(fit)
}

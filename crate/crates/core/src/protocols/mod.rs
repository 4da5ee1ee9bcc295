//! End-to-end simulations of the three measurement protocols.
//!
//! * ring-up/ring-down: drive for `t_d`, then free decay; the time axis mixes
//!   drive-length points (`t < t_d`) with delay points (`t >= t_d`);
//! * Ramsey: two drive pulses separated by a delay `tau`, second pulse phase `phi`;
//! * spectroscopy: a long drive detuned by `delta`, population read at its end.
//!
//! Readout is ideal: `nbar` is taken from the simulated state directly.
//! Every point can be produced either by the density-matrix solver or by the
//! moment equations ([`Backend`]); both honour the same schedules.

pub mod moments;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersive::DeviceParams;
use crate::error::{Error, Result};
use crate::fockspace::{required_dim, Density};
use crate::lindblad::{evolve_with, standard_dissipators, Dissipator, SolverOptions};
use crate::ode::StepStats;
use crate::pulses::{ramsey_schedule, ring_up_schedule, RamseyMode, Schedule, Segment};
use crate::units::hz_to_angular;

pub use moments::{moment_oracle, moment_oracle_from, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    RingUpRingDown,
    Spectroscopy,
}

/// `nbar` over a time axis (s) or detuning axis (Hz), with per-point 1-sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSeries {
    pub axis: Vec<f64>,
    pub nbar: Vec<f64>,
    pub sigma: Vec<f64>,
    pub kind: SeriesKind,
}

impl ExperimentSeries {
    pub fn new(axis: Vec<f64>, nbar: Vec<f64>, sigma: Vec<f64>, kind: SeriesKind) -> Result<Self> {
        if axis.len() != nbar.len() || axis.len() != sigma.len() {
            return Err(Error::Precondition(format!(
                "series lengths differ: axis {}, nbar {}, sigma {}",
                axis.len(),
                nbar.len(),
                sigma.len()
            )));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Precondition("sigma must be >= 0".into()));
        }
        Ok(Self {
            axis,
            nbar,
            sigma,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

/// `nbar(tau, phi)`, rows indexed by `taus`, columns by `phis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyGrid {
    pub taus: Vec<f64>,
    pub phis: Vec<f64>,
    pub nbar: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
}

impl RamseyGrid {
    pub fn new(taus: Vec<f64>, phis: Vec<f64>, nbar: Vec<Vec<f64>>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == taus.len() && m.iter().all(|r| r.len() == phis.len());
        if !shape_ok(&nbar) || !shape_ok(&sigma) {
            return Err(Error::Precondition(format!(
                "grid shape must be {} x {}",
                taus.len(),
                phis.len()
            )));
        }
        if sigma.iter().flatten().any(|s| !(*s >= 0.0)) {
            return Err(Error::Precondition("sigma must be >= 0".into()));
        }
        Ok(Self {
            taus,
            phis,
            nbar,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len() * self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Full density-matrix solve.
    #[default]
    Lindblad,
    /// First-moment equations only.
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub backend: Backend,
    pub solver: SolverOptions<f64>,
    /// Fock truncation; must not undercut the truncation rule.
    pub dim_override: Option<usize>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            backend: Backend::Lindblad,
            solver: SolverOptions::default(),
            dim_override: None,
        }
    }
}

impl SimSettings {
    pub fn moments() -> Self {
        Self {
            backend: Backend::Moments,
            ..Self::default()
        }
    }
}

/// Simulation output with the truncation used and integrator counters.
#[derive(Debug, Clone)]
pub struct Run<D> {
    pub output: D,
    /// Fock dimension (0 for the moment backend).
    pub dim: usize,
    pub stats: StepStats,
}

/// Upper bound on `nbar` reachable from vacuum under drives of modulus `<= u`
/// lasting `drive_time` in total: `min((2u/kappa1)^2, (u * drive_time)^2)`.
pub fn nbar_bound(u: f64, drive_time: f64, kappa1: f64) -> f64 {
    let lossless = (u * drive_time).powi(2);
    if kappa1 > 0.0 {
        (2.0 * u / kappa1).powi(2).min(lossless)
    } else {
        lossless
    }
}

/// Fock dimension for a scenario reaching at most `nbar_max`.
pub fn truncation_for(nbar_max: f64, dim_override: Option<usize>) -> Result<usize> {
    if !nbar_max.is_finite() {
        return Err(Error::TruncationInsufficient {
            dim: dim_override.unwrap_or(0),
            required: usize::MAX,
            nbar: nbar_max,
        });
    }
    let required = required_dim(nbar_max).max(2);
    match dim_override {
        Some(dim) if dim < required => Err(Error::TruncationInsufficient {
            dim,
            required,
            nbar: nbar_max,
        }),
        Some(dim) => Ok(dim),
        None => Ok(required),
    }
}

/// Angular rates `(kappa1, kappa_phi)` from device parameters.
pub fn angular_rates(params: &DeviceParams) -> (f64, f64) {
    (hz_to_angular(params.kappa1), hz_to_angular(params.kappa_phi))
}

fn check_axis(name: &'static str, values: &[f64], sorted: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty(name));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("{name} contains non-finite values")));
    }
    if sorted {
        if values[0] < 0.0 {
            return Err(Error::Precondition(format!("{name} must be >= 0")));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Precondition(format!("{name} must be non-decreasing")));
        }
    }
    Ok(())
}

/// Evolves from `start` under `schedule` and returns `nbar` at `times`
/// (non-decreasing, starting at 0) plus the final state.
fn run_nbar(
    start: &Start,
    schedule: &Schedule<f64>,
    dissipators: &[Dissipator<f64>],
    kappa: (f64, f64),
    times: &[f64],
    settings: &SimSettings,
) -> Result<(Vec<f64>, Vec<Start>, StepStats)> {
    match start {
        Start::Density(rho) => {
            let traj = evolve_with(rho, schedule, dissipators, times, &settings.solver)?;
            let nbar = traj.nbar();
            let stats = traj.stats;
            let states = traj.states.into_iter().map(Start::Density).collect();
            Ok((nbar, states, stats))
        }
        Start::Moments(m) => {
            let ms = moment_oracle_from(*m, schedule, kappa.0, kappa.1, times, &settings.solver)?;
            let nbar = ms.iter().map(|m| m.nbar).collect();
            Ok((nbar, ms.into_iter().map(Start::Moments).collect(), StepStats::default()))
        }
    }
}

#[derive(Debug, Clone)]
enum Start {
    Density(Density<f64>),
    Moments(Moments<f64>),
}

fn initial_state(settings: &SimSettings, nbar_max: f64) -> Result<(Start, usize)> {
    match settings.backend {
        Backend::Lindblad => {
            let dim = truncation_for(nbar_max, settings.dim_override)?;
            Ok((Start::Density(Density::vacuum(dim)?), dim))
        }
        Backend::Moments => Ok((Start::Moments(Moments::vacuum()), 0)),
    }
}

/// Prepends `t = 0` when missing; returns the padded axis and the offset of
/// the caller's first point in it.
fn with_origin(times: &[f64]) -> (Vec<f64>, usize) {
    if times.first() == Some(&0.0) {
        (times.to_vec(), 0)
    } else {
        let mut v = Vec::with_capacity(times.len() + 1);
        v.push(0.0);
        v.extend_from_slice(times);
        (v, 1)
    }
}

/// Ring-up/ring-down series: drive `u` (rad/s) on `[0, t_d)`, `nbar` at each `t`.
///
/// For `t < t_d` the point equals a drive of length `t` read out at once;
/// for `t >= t_d` it is the full drive followed by a free delay `t - t_d`.
pub fn simulate_ring_up_ring_down(
    params: &DeviceParams,
    u: f64,
    t_d: f64,
    times: &[f64],
    settings: &SimSettings,
) -> Result<Run<ExperimentSeries>> {
    check_axis("times", times, true)?;
    let schedule = ring_up_schedule(u, t_d)?;
    let kappa = angular_rates(params);
    let dissipators = standard_dissipators(kappa.0, kappa.1)?;
    let (start, dim) = initial_state(settings, nbar_bound(u, t_d, kappa.0))?;
    let (padded, offset) = with_origin(times);
    let (nbar, _, stats) = run_nbar(&start, &schedule, &dissipators, kappa, &padded, settings)?;
    let nbar = nbar[offset..].to_vec();
    let output = ExperimentSeries::new(
        times.to_vec(),
        nbar,
        vec![0.0; times.len()],
        SeriesKind::RingUpRingDown,
    )?;
    Ok(Run { output, dim, stats })
}

/// Ramsey grid: `nbar` right after the second pulse for every `(tau, phi)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ramsey(
    params: &DeviceParams,
    u: f64,
    t_d: f64,
    taus: &[f64],
    phis: &[f64],
    phi0: f64,
    mode: RamseyMode,
    settings: &SimSettings,
) -> Result<Run<RamseyGrid>> {
    check_axis("taus", taus, false)?;
    check_axis("phis", phis, false)?;
    if taus.iter().any(|&t| t < 0.0) {
        return Err(Error::Precondition("taus must be >= 0".into()));
    }
    // validates u, t_d
    ramsey_schedule(u, t_d, 0.0, 0.0, phi0, mode)?;
    let kappa = angular_rates(params);
    let dissipators = standard_dissipators(kappa.0, kappa.1)?;
    let (start, dim) = initial_state(settings, nbar_bound(u, 2.0 * t_d, kappa.0))?;
    let mut stats = StepStats::default();

    // first pulse
    let first = ring_up_schedule(u, t_d)?;
    let (_, states, s) = run_nbar(&start, &first, &dissipators, kappa, &[0.0, t_d], settings)?;
    stats.merge(&s);
    let after_first = states.into_iter().last().unwrap();

    // free evolution to every distinct delay
    let mut delays: Vec<f64> = taus.to_vec();
    delays.push(0.0);
    delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    delays.dedup();
    let (_, waited, s) = run_nbar(&after_first, &Schedule::idle(), &dissipators, kappa, &delays, settings)?;
    stats.merge(&s);

    // second pulse, one independent solve per grid point
    let points: Vec<(usize, usize)> = (0..taus.len())
        .flat_map(|i| (0..phis.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<(f64, StepStats)>> = points
        .par_iter()
        .map(|&(i, j)| {
            let tau = taus[i];
            let full = ramsey_schedule(u, t_d, tau, phis[j], phi0, mode)?;
            let amplitude = full.envelope_at(t_d + tau + 0.5 * t_d);
            let k = delays.partition_point(|&d| d < tau);
            let second = second_pulse(amplitude, t_d)?;
            let (nbar, _, s) = run_nbar(&waited[k], &second, &dissipators, kappa, &[0.0, t_d], settings)?;
            Ok((nbar[1], s))
        })
        .collect();
    let mut nbar = vec![vec![0.0; phis.len()]; taus.len()];
    for (&(i, j), r) in points.iter().zip(results) {
        let (v, s) = r?;
        nbar[i][j] = v;
        stats.merge(&s);
    }
    let sigma = vec![vec![0.0; phis.len()]; taus.len()];
    let output = RamseyGrid::new(taus.to_vec(), phis.to_vec(), nbar, sigma)?;
    Ok(Run { output, dim, stats })
}

fn second_pulse(amplitude: Complex<f64>, t_d: f64) -> Result<Schedule<f64>> {
    if amplitude == Complex::new(0.0, 0.0) {
        return Ok(Schedule::idle());
    }
    Schedule::new(
        vec![Segment {
            start: 0.0,
            duration: t_d,
            amplitude,
        }],
        0.0,
    )
}

/// Quasi-CW spectroscopy: `nbar` at the end of a drive of length `t_d`
/// detuned by each `delta` (Hz) from the mode.
pub fn simulate_spectroscopy(
    params: &DeviceParams,
    u: f64,
    t_d: f64,
    deltas: &[f64],
    settings: &SimSettings,
) -> Result<Run<ExperimentSeries>> {
    check_axis("deltas", deltas, false)?;
    let base = ring_up_schedule(u, t_d)?;
    let kappa = angular_rates(params);
    let dissipators = standard_dissipators(kappa.0, kappa.1)?;
    let (start, dim) = initial_state(settings, nbar_bound(u, t_d, kappa.0))?;
    let results: Vec<Result<(f64, StepStats)>> = deltas
        .par_iter()
        .map(|&d| {
            let schedule = base.clone().with_detuning(hz_to_angular(d));
            let (nbar, _, s) = run_nbar(&start, &schedule, &dissipators, kappa, &[0.0, t_d], settings)?;
            Ok((nbar[1], s))
        })
        .collect();
    let mut stats = StepStats::default();
    let mut nbar = Vec::with_capacity(deltas.len());
    for r in results {
        let (v, s) = r?;
        nbar.push(v);
        stats.merge(&s);
    }
    let output = ExperimentSeries::new(
        deltas.to_vec(),
        nbar,
        vec![0.0; deltas.len()],
        SeriesKind::Spectroscopy,
    )?;
    Ok(Run { output, dim, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn device(k1_hz: f64, kphi_hz: f64) -> DeviceParams {
        DeviceParams {
            kappa1: k1_hz,
            kappa_phi: kphi_hz,
            ..DeviceParams::reference()
        }
    }

    #[test]
    fn ring_up_starts_at_zero_and_decays_after_drive() {
        let p = device(480e3, 0.0);
        let k1 = 2.0 * PI * 480e3;
        let t_d = 2e-6;
        let times: Vec<f64> = (0..=30).map(|i| i as f64 * 0.2e-6).collect();
        let run = simulate_ring_up_ring_down(&p, 4.35e6, t_d, &times, &SimSettings::default()).unwrap();
        let s = &run.output;
        assert_eq!(s.nbar[0], 0.0);
        let n_td = s.nbar[10];
        for (t, n) in s.axis.iter().zip(&s.nbar).skip(11) {
            let want = n_td * (-k1 * (t - t_d)).exp();
            assert!((n - want).abs() <= 1e-5 * n_td, "t={t}");
        }
        assert!(run.dim >= required_dim((2.0 * 4.35e6 / k1).powi(2)));
    }

    #[test]
    fn long_drive_reaches_steady_state() {
        let p = device(480e3, 0.0);
        let k1 = 2.0 * PI * 480e3;
        let u = 4.35e6;
        let t = 20.0 / k1;
        let run = simulate_ring_up_ring_down(&p, u, 20e-6, &[t], &SimSettings::moments()).unwrap();
        let nss = (2.0 * u / k1).powi(2);
        assert!((run.output.nbar[0] - nss).abs() < 0.01 * nss);
        let run = simulate_ring_up_ring_down(&p, u, 20e-6, &[5.0 / k1], &SimSettings::moments()).unwrap();
        let closed = nss * (1.0 - (-2.5f64).exp()).powi(2);
        assert!((run.output.nbar[0] - closed).abs() < 1e-6 * nss);
    }

    #[test]
    fn ring_up_is_continuous_at_drive_end() {
        let p = device(480e3, 180e3);
        let t_d = 2e-6;
        let eps = 1e-14;
        let run = simulate_ring_up_ring_down(&p, 4e6, t_d, &[t_d - eps, t_d, t_d + eps], &SimSettings::default())
            .unwrap();
        let n = &run.output.nbar;
        assert!((n[0] - n[1]).abs() < 1e-6 * n[1]);
        assert!((n[2] - n[1]).abs() < 1e-6 * n[1]);
    }

    #[test]
    fn lossless_ramsey_cancels_at_pi() {
        let p = device(0.0, 0.0);
        let run = simulate_ramsey(
            &p,
            3e6,
            0.5e-6,
            &[0.0],
            &[PI],
            0.0,
            RamseyMode::LiteralCosine,
            &SimSettings::default(),
        )
        .unwrap();
        assert!(run.output.nbar[0][0].abs() < 1e-9, "{}", run.output.nbar[0][0]);
    }

    #[test]
    fn ramsey_matches_single_long_pulse() {
        let p = device(480e3, 180e3);
        let u = 4.35e6;
        let t_d = 0.5e-6;
        let grid = simulate_ramsey(&p, u, t_d, &[0.0], &[0.0], 0.0, RamseyMode::LiteralCosine, &SimSettings::default())
            .unwrap();
        let long = simulate_ring_up_ring_down(&p, u, 2.0 * t_d, &[2.0 * t_d], &SimSettings::default()).unwrap();
        assert!((grid.output.nbar[0][0] - long.output.nbar[0]).abs() < 1e-7 * long.output.nbar[0]);
    }

    #[test]
    fn ramsey_grid_is_2pi_periodic() {
        let p = device(480e3, 180e3);
        let phis = [0.25, 1.0, 1.5];
        let shifted: Vec<f64> = phis.iter().map(|p| p + 2.0 * PI).collect();
        for mode in [RamseyMode::LiteralCosine, RamseyMode::ComplexPhase] {
            let a = simulate_ramsey(&p, 4e6, 0.5e-6, &[0.0, 0.7e-6], &phis, 0.3, mode, &SimSettings::moments()).unwrap();
            let b = simulate_ramsey(&p, 4e6, 0.5e-6, &[0.0, 0.7e-6], &shifted, 0.3, mode, &SimSettings::moments()).unwrap();
            assert_eq!(a.output.nbar, b.output.nbar);
        }
    }

    #[test]
    fn spectroscopy_peak_and_symmetry() {
        let p = device(480e3, 180e3);
        let deltas = [-600e3, -200e3, 0.0, 200e3, 600e3];
        let run = simulate_spectroscopy(&p, 2e6, 10e-6, &deltas, &SimSettings::default()).unwrap();
        let n = &run.output.nbar;
        assert!(n[2] > n[1] && n[2] > n[3] && n[1] > n[0]);
        assert!((n[0] - n[4]).abs() <= 1e-6 * n[0]);
        assert!((n[1] - n[3]).abs() <= 1e-6 * n[1]);
    }

    #[test]
    fn scaling_covariance() {
        let s = 1.7;
        let base = device(480e3, 180e3);
        let scaled = device(480e3 * s, 180e3 * s);
        let times = [0.3e-6, 1.0e-6, 2.5e-6, 4.0e-6];
        let scaled_times: Vec<f64> = times.iter().map(|t| t / s).collect();
        let a = simulate_ring_up_ring_down(&base, 4e6, 2e-6, &times, &SimSettings::default()).unwrap();
        let b = simulate_ring_up_ring_down(&scaled, 4e6 * s, 2e-6 / s, &scaled_times, &SimSettings::default())
            .unwrap();
        for (x, y) in a.output.nbar.iter().zip(&b.output.nbar) {
            assert!((x - y).abs() < 1e-7 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn truncation_override_below_rule_fails() {
        let p = device(480e3, 0.0);
        let settings = SimSettings {
            dim_override: Some(5),
            ..SimSettings::default()
        };
        assert!(matches!(
            simulate_ring_up_ring_down(&p, 4.35e6, 2e-6, &[1e-6], &settings),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn unsorted_times_rejected() {
        let p = device(480e3, 0.0);
        assert!(simulate_ring_up_ring_down(&p, 4e6, 2e-6, &[2e-6, 1e-6], &SimSettings::default()).is_err());
        assert!(simulate_ring_up_ring_down(&p, 4e6, 2e-6, &[], &SimSettings::default()).is_err());
    }
}

//! Master-equation time evolution of the mode's density matrix.
//!
//! `d rho/dt = -i [H, rho] + kappa1 D[a] rho + (kappa_phi / 2) D[a^dag a] rho`
//! with `D[L] rho = L rho L^dag - {L^dag L, rho} / 2`.

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{make_annihilation, make_number, trace_product, Density, InvariantReport, Matrix};
use crate::ode::{Dopri5, StepStats};
use crate::pulses::{drive_hamiltonian, Schedule};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Single-quantum loss, operator `a`, prefactor `rate`.
    Loss,
    /// Pure dephasing, operator `a^dag a`, prefactor `rate / 2`.
    Dephasing,
}

/// A dissipation channel with its angular rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipator<T> {
    channel: Channel,
    rate: T,
}

impl<T: Real> Dissipator<T> {
    pub fn new(channel: Channel, rate: T) -> Result<Self> {
        if !(rate >= T::zero()) || !rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: format!("dissipation rate must be finite and >= 0, got {}", rate),
            });
        }
        Ok(Self { channel, rate })
    }

    pub fn loss(kappa1: T) -> Result<Self> {
        Self::new(Channel::Loss, kappa1)
    }

    pub fn dephasing(kappa_phi: T) -> Result<Self> {
        Self::new(Channel::Dephasing, kappa_phi)
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn rate(&self) -> T {
        self.rate
    }

    /// Jump operator and the prefactor that multiplies `D[L]`.
    fn operator(&self, dim: usize) -> Result<(Matrix<T>, T)> {
        Ok(match self.channel {
            Channel::Loss => (make_annihilation(dim)?, self.rate),
            Channel::Dephasing => (make_number(dim)?, self.rate * T::lit(0.5)),
        })
    }
}

/// Both channels at once; zero rates are dropped.
pub fn standard_dissipators<T: Real>(kappa1: T, kappa_phi: T) -> Result<Vec<Dissipator<T>>> {
    let mut out = Vec::with_capacity(2);
    let loss = Dissipator::loss(kappa1)?;
    let deph = Dissipator::dephasing(kappa_phi)?;
    if kappa1 > T::zero() {
        out.push(loss);
    }
    if kappa_phi > T::zero() {
        out.push(deph);
    }
    Ok(out)
}

/// Prepared generator for a fixed Hamiltonian.
struct Generator<'a, T> {
    h: Matrix<T>,
    jumps: &'a [Jump<T>],
}

struct Jump<T> {
    l: Matrix<T>,
    ldag_l: Matrix<T>,
    weight: T,
}

fn prepare_jumps<T: Real>(dissipators: &[Dissipator<T>], dim: usize) -> Result<Vec<Jump<T>>> {
    dissipators
        .iter()
        .filter(|d| d.rate > T::zero())
        .map(|d| {
            let (l, weight) = d.operator(dim)?;
            let ldag_l = l.adjoint().matmul_unchecked(&l);
            Ok(Jump { l, ldag_l, weight })
        })
        .collect()
}

impl<T: Real> Generator<'_, T> {
    /// Every product has a sparse operator on the left: `X A = (A^dag X^dag)^dag`
    /// and `H`, `L^dag L` are Hermitian.
    fn apply(&self, rho: &Matrix<T>) -> Matrix<T> {
        let rho_dag = rho.adjoint();
        let minus_i = Complex::new(T::zero(), -T::one());
        let h_rho = self.h.matmul_unchecked(rho);
        let rho_h = self.h.matmul_unchecked(&rho_dag).adjoint();
        let mut out = (&h_rho - &rho_h).scale(minus_i);
        let half = T::lit(0.5);
        for j in self.jumps {
            // L rho L^dag = L (L rho^dag)^dag
            let l_rho_dag = j.l.matmul_unchecked(&rho_dag);
            let sandwich = j.l.matmul_unchecked(&l_rho_dag.adjoint());
            let k_rho = j.ldag_l.matmul_unchecked(rho);
            let rho_k = j.ldag_l.matmul_unchecked(&rho_dag).adjoint();
            out.axpy(j.weight, &sandwich);
            out.axpy(-j.weight * half, &k_rho);
            out.axpy(-j.weight * half, &rho_k);
        }
        out
    }
}

/// Right-hand side `-i[H, rho] + sum_k rate_k D[L_k] rho`.
pub fn lindblad_rhs<T: Real>(
    rho: &Density<T>,
    h: &Matrix<T>,
    dissipators: &[Dissipator<T>],
) -> Result<Matrix<T>> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: rho.dim(),
        });
    }
    let dev = h.hermiticity_error();
    if dev > T::tol(1e-10) * (T::one() + h.max_abs()) {
        return Err(Error::NonHermitian {
            deviation: dev.to_f64_lossy(),
        });
    }
    let jumps = prepare_jumps(dissipators, rho.dim())?;
    let generator = Generator {
        h: h.clone(),
        jumps: &jumps,
    };
    Ok(generator.apply(rho.as_matrix()))
}

/// Solver settings for [`evolve_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Validate every sampled state against the density-matrix invariants.
    pub check_invariants: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            check_invariants: true,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub(crate) fn integrator(&self) -> Dopri5<T> {
        Dopri5::new(self.rtol, self.atol)
    }
}

/// Sampled solution of the master equation.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Density<T>>,
    /// At least `"nbar"` and `"a"` (the coherent amplitude `<a>`).
    pub observables: BTreeMap<String, Vec<Complex<T>>>,
    pub stats: StepStats,
}

impl<T: Real> Trajectory<T> {
    /// Real part of the `nbar` series.
    pub fn nbar(&self) -> Vec<T> {
        self.observables["nbar"].iter().map(|z| z.re).collect()
    }

    pub fn coherent_amplitude(&self) -> &[Complex<T>] {
        &self.observables["a"]
    }

    pub fn final_state(&self) -> &Density<T> {
        self.states.last().expect("trajectory has at least one sample")
    }
}

/// Checks that `sample_times` is finite, non-decreasing and starts at `t0`.
pub(crate) fn check_sample_times<T: Real>(sample_times: &[T], t0: T) -> Result<()> {
    let first = *sample_times.first().ok_or(Error::Empty("sample_times"))?;
    if first != t0 {
        return Err(Error::Precondition(format!(
            "sample times must start at {}, got {}",
            t0, first
        )));
    }
    for w in sample_times.windows(2) {
        if !(w[1] >= w[0]) || !w[1].is_finite() {
            return Err(Error::Precondition("sample times must be non-decreasing".into()));
        }
    }
    Ok(())
}

/// Sorted union of sample times and schedule breakpoints inside `[0, t_end]`.
pub(crate) fn knots<T: Real>(sample_times: &[T], schedule: &Schedule<T>) -> Vec<T> {
    let t_end = *sample_times.last().unwrap();
    let mut all: Vec<T> = sample_times.to_vec();
    all.extend(
        schedule
            .breakpoints()
            .into_iter()
            .filter(|&b| b > T::zero() && b < t_end),
    );
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all
}

/// Evolves `rho0` with default solver settings.
pub fn evolve<T: Real>(
    rho0: &Density<T>,
    schedule: &Schedule<T>,
    dissipators: &[Dissipator<T>],
    sample_times: &[T],
) -> Result<Trajectory<T>> {
    evolve_with(rho0, schedule, dissipators, sample_times, &SolverOptions::default())
}

/// Evolves `rho0` under `schedule`, sampling at `sample_times` (which start at 0).
///
/// The integrator is restarted at every envelope discontinuity so each
/// integration piece sees a constant Hamiltonian.
pub fn evolve_with<T: Real>(
    rho0: &Density<T>,
    schedule: &Schedule<T>,
    dissipators: &[Dissipator<T>],
    sample_times: &[T],
    opts: &SolverOptions<T>,
) -> Result<Trajectory<T>> {
    check_sample_times(sample_times, T::zero())?;
    let dim = rho0.dim();
    let jumps = prepare_jumps(dissipators, dim)?;
    let number = make_number::<T>(dim)?;
    let lowering = make_annihilation::<T>(dim)?;
    let solver = opts.integrator();

    let mut times = Vec::with_capacity(sample_times.len());
    let mut states = Vec::with_capacity(sample_times.len());
    let mut nbar = Vec::with_capacity(sample_times.len());
    let mut amp = Vec::with_capacity(sample_times.len());
    let mut stats = StepStats::default();

    let mut record = |t: T, rho: &Matrix<T>| -> Result<()> {
        if opts.check_invariants {
            InvariantReport::measure(rho).check::<T>().map_err(|e| {
                Error::IntegrationAccuracy(format!("at t = {:e} s: {}", t.to_f64_lossy(), e))
            })?;
        }
        nbar.push(trace_product(&number, rho)?);
        amp.push(trace_product(&lowering, rho)?);
        times.push(t);
        states.push(Density::new_unchecked(rho.clone()));
        Ok(())
    };

    let grid = knots(sample_times, schedule);
    let mut rho = rho0.as_matrix().clone();
    let mut h_step = T::zero();
    let mut next_sample = 0usize;
    let mut generator: Option<(Complex<T>, Generator<T>)> = None;

    while next_sample < sample_times.len() && sample_times[next_sample] == grid[0] {
        record(grid[0], &rho)?;
        next_sample += 1;
    }
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let u = schedule.envelope_at(t0 + (t1 - t0) * T::lit(0.5));
        let rebuild = generator.as_ref().map_or(true, |(prev, _)| *prev != u);
        if rebuild {
            let h = drive_hamiltonian(u, schedule.detuning(), dim)?;
            generator = Some((u, Generator { h, jumps: &jumps }));
        }
        let gen = &generator.as_ref().unwrap().1;
        solver.advance(|r: &Matrix<T>| gen.apply(r), t0, t1, &mut rho, &mut h_step, &mut stats)?;
        while next_sample < sample_times.len() && sample_times[next_sample] == t1 {
            record(t1, &rho)?;
            next_sample += 1;
        }
    }

    let mut observables = BTreeMap::new();
    observables.insert("nbar".to_string(), nbar);
    observables.insert("a".to_string(), amp);
    Ok(Trajectory {
        times,
        states,
        observables,
        stats,
    })
}

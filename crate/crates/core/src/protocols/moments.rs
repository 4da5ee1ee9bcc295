//! First-moment equations of the driven, lossy, dephasing mode.
//!
//! For `H = u a^dag + conj(u) a - delta a^dag a` with loss `kappa1 D[a]` and
//! dephasing `(kappa_phi / 2) D[a^dag a]`, the Heisenberg equations close on
//! `<a>` and `nbar = <a^dag a>`:
//!
//! ```text
//! d<a>/dt  = -i u + (i delta - kappa1/2 - kappa_phi/4) <a>
//! dnbar/dt = -kappa1 nbar - 2 Im(conj(u) <a>)
//! ```
//!
//! These two scalar ODEs are integrated independently of the density-matrix
//! solver and serve as its cross-check, and as the fast model inside fits.

use num_complex::Complex;

use crate::error::Result;
use crate::lindblad::{check_sample_times, knots, SolverOptions};
use crate::ode::{OdeState, StepStats};
use crate::pulses::Schedule;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    /// Coherent amplitude `<a>`.
    pub a: Complex<T>,
    /// Mean occupation `<a^dag a>`.
    pub nbar: T,
}

impl<T: Real> Moments<T> {
    pub fn vacuum() -> Self {
        Self {
            a: Complex::new(T::zero(), T::zero()),
            nbar: T::zero(),
        }
    }

    /// Pure coherent state `|alpha>`.
    pub fn coherent(alpha: Complex<T>) -> Self {
        Self {
            a: alpha,
            nbar: alpha.norm_sqr(),
        }
    }
}

impl<T: Real> OdeState<T> for Moments<T> {
    fn axpy(&mut self, c: T, x: &Self) {
        self.a += x.a * c;
        self.nbar += x.nbar * c;
    }

    fn error_ratio(err: &Self, y0: &Self, y1: &Self, rtol: T, atol: T) -> T {
        let ea = err.a.norm() / (atol + rtol * y0.a.norm().max(y1.a.norm()));
        let en = err.nbar.abs() / (atol + rtol * y0.nbar.abs().max(y1.nbar.abs()));
        ea.max(en)
    }

    fn max_norm(&self) -> T {
        self.a.norm().max(self.nbar.abs())
    }
}

/// Rates of the moment equations for one constant-envelope piece.
#[derive(Debug, Clone, Copy)]
struct MomentRhs<T> {
    u: Complex<T>,
    delta: T,
    kappa1: T,
    kappa_phi: T,
}

impl<T: Real> MomentRhs<T> {
    fn eval(&self, m: &Moments<T>) -> Moments<T> {
        let i = Complex::new(T::zero(), T::one());
        let decay = self.kappa1 * T::lit(0.5) + self.kappa_phi * T::lit(0.25);
        let da = -(i * self.u) + (i * self.delta - decay) * m.a;
        let dn = -self.kappa1 * m.nbar - T::lit(2.0) * (self.u.conj() * m.a).im;
        Moments { a: da, nbar: dn }
    }
}

/// Moments sampled at `times` (starting at 0) from the vacuum.
pub fn moment_oracle<T: Real>(
    schedule: &Schedule<T>,
    kappa1: T,
    kappa_phi: T,
    times: &[T],
) -> Result<Vec<Moments<T>>> {
    moment_oracle_from(Moments::vacuum(), schedule, kappa1, kappa_phi, times, &SolverOptions::default())
}

/// Moments sampled at `times` (starting at 0) from an arbitrary initial state.
pub fn moment_oracle_from<T: Real>(
    initial: Moments<T>,
    schedule: &Schedule<T>,
    kappa1: T,
    kappa_phi: T,
    times: &[T],
    opts: &SolverOptions<T>,
) -> Result<Vec<Moments<T>>> {
    check_sample_times(times, T::zero())?;
    let solver = opts.integrator();
    let grid = knots(times, schedule);
    let mut out = Vec::with_capacity(times.len());
    let mut y = initial;
    let mut h = T::zero();
    let mut stats = StepStats::default();
    let mut next = 0usize;
    while next < times.len() && times[next] == grid[0] {
        out.push(y);
        next += 1;
    }
    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let rhs = MomentRhs {
            u: schedule.envelope_at(t0 + (t1 - t0) * T::lit(0.5)),
            delta: schedule.detuning(),
            kappa1,
            kappa_phi,
        };
        solver.advance(|m: &Moments<T>| rhs.eval(m), t0, t1, &mut y, &mut h, &mut stats)?;
        while next < times.len() && times[next] == t1 {
            out.push(y);
            next += 1;
        }
    }
    Ok(out)
}

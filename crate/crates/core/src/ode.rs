//! Dormand–Prince 5(4) integrator with embedded error control.
//!
//! The solver advances a state over a single interval on which the right-hand
//! side is smooth. Callers split their time axis at every discontinuity and
//! at every output time and call [`Dopri5::advance`] once per piece.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fockspace::Matrix;
use crate::scalar::Real;

/// Vector-space operations the integrator needs from a state.
pub trait OdeState<T: Real>: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: T, x: &Self);

    /// `max_i |err_i| / (atol + rtol * max(|y0_i|, |y1_i|))`
    fn error_ratio(err: &Self, y0: &Self, y1: &Self, rtol: T, atol: T) -> T;

    /// `max_i |y_i|`, used by the initial step heuristic.
    fn max_norm(&self) -> T;
}

impl<T: Real> OdeState<T> for Matrix<T> {
    fn axpy(&mut self, a: T, x: &Self) {
        Matrix::axpy(self, a, x);
    }

    fn error_ratio(err: &Self, y0: &Self, y1: &Self, rtol: T, atol: T) -> T {
        let mut worst = T::zero();
        for ((e, a), b) in err.as_slice().iter().zip(y0.as_slice()).zip(y1.as_slice()) {
            let sc = atol + rtol * a.norm().max(b.norm());
            worst = worst.max(e.norm() / sc);
        }
        worst
    }

    fn max_norm(&self) -> T {
        self.max_abs()
    }
}

impl<T: Real> OdeState<T> for Vec<Complex<T>> {
    fn axpy(&mut self, a: T, x: &Self) {
        for (y, &v) in self.iter_mut().zip(x) {
            *y += v * a;
        }
    }

    fn error_ratio(err: &Self, y0: &Self, y1: &Self, rtol: T, atol: T) -> T {
        err.iter()
            .zip(y0)
            .zip(y1)
            .fold(T::zero(), |w, ((e, a), b)| {
                w.max(e.norm() / (atol + rtol * a.norm().max(b.norm())))
            })
    }

    fn max_norm(&self) -> T {
        self.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }
}

/// Running counters for a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.rhs_evals += other.rhs_evals;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    /// Upper bound on attempted steps per `advance` call.
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            max_steps: 1_000_000,
        }
    }
}

// Butcher tableau; nodes are not needed for autonomous right-hand sides.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl<T: Real> Dopri5<T> {
    pub fn new(rtol: T, atol: T) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates `y' = f(y)` from `t0` to `t1` in place.
    ///
    /// `h` carries the step-size suggestion between calls; pass zero to let
    /// the solver pick a starting step. The right-hand side is autonomous on
    /// the interval by contract.
    pub fn advance<S, F>(
        &self,
        mut f: F,
        t0: T,
        t1: T,
        y: &mut S,
        h: &mut T,
        stats: &mut StepStats,
    ) -> Result<()>
    where
        S: OdeState<T>,
        F: FnMut(&S) -> S,
    {
        let span = t1 - t0;
        if span <= T::zero() {
            return Ok(());
        }
        let lit = T::lit;
        let mut t = t0;
        let mut k1 = f(y);
        stats.rhs_evals += 1;
        if *h <= T::zero() {
            *h = self.initial_step(&mut f, y, &k1, span, stats);
        }
        let h_floor = T::epsilon() * lit(16.0) * t0.abs().max(t1.abs()).max(span);
        let mut steps = 0usize;
        let mut last_ratio = lit(1e-4);

        while t < t1 {
            if steps >= self.max_steps {
                return Err(Error::IntegrationAccuracy(format!(
                    "step budget of {} exhausted at t = {:e}",
                    self.max_steps,
                    t.to_f64_lossy()
                )));
            }
            steps += 1;
            let mut step = h.min(t1 - t);
            let last = step >= t1 - t;
            if last {
                step = t1 - t;
            }
            if step < h_floor && !last {
                return Err(Error::Stiffness {
                    t: t.to_f64_lossy(),
                    h: step.to_f64_lossy(),
                });
            }

            let stage = |terms: &[(f64, &S)]| {
                let mut s = y.clone();
                for &(c, k) in terms {
                    if c != 0.0 {
                        s.axpy(step * lit(c), k);
                    }
                }
                s
            };
            let k2 = f(&stage(&[(A21, &k1)]));
            let k3 = f(&stage(&[(A31, &k1), (A32, &k2)]));
            let k4 = f(&stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&stage(&[
                (A61, &k1),
                (A62, &k2),
                (A63, &k3),
                (A64, &k4),
                (A65, &k5),
            ]));
            let y_new = stage(&[
                (A71, &k1),
                (A73, &k3),
                (A74, &k4),
                (A75, &k5),
                (A76, &k6),
            ]);
            let k7 = f(&y_new);
            stats.rhs_evals += 6;

            // local error estimate = step * sum(E_i k_i)
            let mut err = k1.clone();
            err.axpy(lit(E1 - 1.0), &k1);
            err.axpy(lit(E3), &k3);
            err.axpy(lit(E4), &k4);
            err.axpy(lit(E5), &k5);
            err.axpy(lit(E6), &k6);
            err.axpy(lit(E7), &k7);
            let ratio = S::error_ratio(&err, y, &y_new, self.rtol / step, self.atol / step);

            if !ratio.is_finite() {
                stats.rejected += 1;
                *h = step * lit(0.2);
                continue;
            }
            if ratio <= T::one() {
                stats.accepted += 1;
                t = if last { t1 } else { t + step };
                *y = y_new;
                k1 = k7;
                // PI controller (Hairer's beta = 0.04)
                let fac = lit(0.9)
                    * ratio.max(lit(1e-10)).powf(lit(-0.17))
                    * last_ratio.powf(lit(0.04));
                let fac = fac.max(lit(0.2)).min(lit(10.0));
                if !last || step >= *h {
                    *h = step * fac;
                }
                last_ratio = ratio.max(lit(1e-4));
            } else {
                stats.rejected += 1;
                let fac = (lit(0.9) * ratio.powf(lit(-0.2))).max(lit(0.2));
                *h = step * fac;
            }
        }
        Ok(())
    }

    fn initial_step<S, F>(&self, f: &mut F, y: &S, k1: &S, span: T, stats: &mut StepStats) -> T
    where
        S: OdeState<T>,
        F: FnMut(&S) -> S,
    {
        let lit = T::lit;
        let scale = self.atol + self.rtol * y.max_norm();
        let d0 = y.max_norm() / scale;
        let d1 = k1.max_norm() / scale;
        let h0 = if d0 < lit(1e-5) || d1 < lit(1e-5) {
            lit(1e-6) * span
        } else {
            lit(0.01) * d0 / d1
        };
        let h0 = h0.min(span);
        let mut y1 = y.clone();
        y1.axpy(h0, k1);
        let k2 = f(&y1);
        stats.rhs_evals += 1;
        let mut diff = k2.clone();
        diff.axpy(-T::one(), k1);
        let d2 = diff.max_norm() / scale / h0;
        let h1 = if d1.max(d2) <= lit(1e-15) {
            (h0 * lit(1e-3)).max(lit(1e-6) * span)
        } else {
            (lit(0.01) / d1.max(d2)).powf(lit(0.2))
        };
        (lit(100.0) * h0).min(h1).min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn exponential_decay() {
        let solver = Dopri5::<f64>::default();
        let mut y = vec![C::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut stats = StepStats::default();
        solver
            .advance(|y: &Vec<C>| vec![-y[0] * 2.0], 0.0, 3.0, &mut y, &mut h, &mut stats)
            .unwrap();
        assert!((y[0].re - (-6.0f64).exp()).abs() < 1e-11);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_rotation_over_many_periods() {
        // y' = i w y
        let w = 2.0 * std::f64::consts::PI * 1e6;
        let solver = Dopri5::<f64>::default();
        let mut y = vec![C::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut stats = StepStats::default();
        let tf = 10e-6;
        solver
            .advance(|y: &Vec<C>| vec![y[0] * C::new(0.0, w)], 0.0, tf, &mut y, &mut h, &mut stats)
            .unwrap();
        let want = C::from_polar(1.0, w * tf);
        assert!((y[0] - want).norm() < 1e-7, "{:?}", y[0]);
    }

    #[test]
    fn finite_time_blowup_reports_underflow() {
        // y' = y^2, y(0) = 1 is singular at t = 1
        let solver = Dopri5::<f64>::default();
        let mut y = vec![C::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut stats = StepStats::default();
        let res = solver.advance(|y: &Vec<C>| vec![y[0] * y[0]], 0.0, 2.0, &mut y, &mut h, &mut stats);
        assert!(matches!(res, Err(Error::Stiffness { .. })), "{res:?}");
    }

    #[test]
    fn step_budget_is_enforced() {
        let solver = Dopri5 {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 50,
        };
        let mut y = vec![C::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut stats = StepStats::default();
        let res = solver.advance(|y: &Vec<C>| vec![y[0] * -1e9], 0.0, 1.0, &mut y, &mut h, &mut stats);
        assert!(matches!(res, Err(Error::IntegrationAccuracy(_))));
    }

    #[test]
    fn single_precision_runs() {
        let solver = Dopri5::<f32>::new(1e-5, 1e-7);
        let mut y = vec![Complex::<f32>::new(1.0, 0.0)];
        let mut h = 0.0;
        let mut stats = StepStats::default();
        solver
            .advance(|y: &Vec<Complex<f32>>| vec![-y[0]], 0.0, 1.0, &mut y, &mut h, &mut stats)
            .unwrap();
        assert!((y[0].re - (-1.0f32).exp()).abs() < 1e-4);
    }
}

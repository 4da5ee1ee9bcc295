//! Piecewise-constant drive envelopes and the rotating-frame drive Hamiltonian.
//!
//! The frame rotates at the mode frequency. A drive with complex envelope
//! `u(t)` and frame detuning `delta` gives
//! `H(t) = Re(u) (a + a^dag) + Im(u) (i a^dag - i a) - delta a^dag a`,
//! which equals `u a^dag + conj(u) a - delta a^dag a`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{make_annihilation, Matrix};
use crate::scalar::Real;

/// One constant-amplitude window `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: T,
    pub duration: T,
    pub amplitude: Complex<T>,
}

impl<T: Real> Segment<T> {
    #[inline]
    pub fn end(&self) -> T {
        self.start + self.duration
    }
}

/// How the second Ramsey pulse carries its phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamseyMode {
    /// Real amplitude `U cos(phi + phi0)`.
    #[default]
    LiteralCosine,
    /// Phase-rotated drive `U exp(i (phi + phi0))`.
    ComplexPhase,
}

/// Sorted, non-overlapping drive segments plus a frame detuning (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    segments: Vec<Segment<T>>,
    detuning: T,
    total_span: T,
}

impl<T: Real> Schedule<T> {
    /// Validates and normalizes: segments are sorted, checked for overlap, and
    /// contiguous segments with equal amplitude are merged.
    pub fn new(mut segments: Vec<Segment<T>>, detuning: T) -> Result<Self> {
        for s in &segments {
            if !(s.duration > T::zero()) || !s.start.is_finite() || !s.duration.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "segment at {:e} s has non-positive or non-finite duration",
                    s.start.to_f64_lossy()
                )));
            }
            if s.start < T::zero() {
                return Err(Error::InvalidSchedule("segment starts before t = 0".into()));
            }
        }
        if !detuning.is_finite() {
            return Err(Error::InvalidSchedule("detuning is not finite".into()));
        }
        segments.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        let mut merged: Vec<Segment<T>> = Vec::with_capacity(segments.len());
        for s in segments {
            if let Some(prev) = merged.last_mut() {
                if s.start < prev.end() {
                    return Err(Error::InvalidSchedule(format!(
                        "segments overlap at {:e} s",
                        s.start.to_f64_lossy()
                    )));
                }
                if s.start == prev.end() && s.amplitude == prev.amplitude {
                    prev.duration = s.end() - prev.start;
                    continue;
                }
            }
            merged.push(s);
        }
        let total_span = merged.last().map(|s| s.end()).unwrap_or_else(T::zero);
        Ok(Self {
            segments: merged,
            detuning,
            total_span,
        })
    }

    /// Free evolution: no drive, zero detuning.
    pub fn idle() -> Self {
        Self {
            segments: Vec::new(),
            detuning: T::zero(),
            total_span: T::zero(),
        }
    }

    pub fn with_detuning(mut self, detuning: T) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn detuning(&self) -> T {
        self.detuning
    }

    /// End of the last segment.
    pub fn total_span(&self) -> T {
        self.total_span
    }

    /// Envelope `u(t)`; zero outside every segment.
    pub fn envelope_at(&self, t: T) -> Complex<T> {
        self.segments
            .iter()
            .find(|s| s.start <= t && t < s.end())
            .map(|s| s.amplitude)
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Every instant where the envelope may jump, ascending and deduplicated.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::with_capacity(2 * self.segments.len());
        for s in &self.segments {
            for t in [s.start, s.end()] {
                if out.last().map_or(true, |&l| l < t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// Largest envelope modulus.
    pub fn peak_amplitude(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |m, s| m.max(s.amplitude.norm()))
    }
}

/// Single drive window `[0, t_d)` at real amplitude `u`.
pub fn ring_up_schedule<T: Real>(u: T, t_d: T) -> Result<Schedule<T>> {
    check_drive(u, t_d)?;
    Schedule::new(
        vec![Segment {
            start: T::zero(),
            duration: t_d,
            amplitude: Complex::new(u, T::zero()),
        }],
        T::zero(),
    )
}

/// Two equal-length pulses separated by a delay `tau` after the first ends.
///
/// The second pulse occupies `[t_d + tau, 2 t_d + tau)` and carries the
/// relative phase `phi + phi0` according to `mode`. Phases are reduced
/// modulo `2 pi` individually before use.
pub fn ramsey_schedule<T: Real>(
    u: T,
    t_d: T,
    tau: T,
    phi: T,
    phi0: T,
    mode: RamseyMode,
) -> Result<Schedule<T>> {
    check_drive(u, t_d)?;
    if !(tau >= T::zero()) || !tau.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "delay must be finite and >= 0".into(),
        });
    }
    let theta = reduce_phase(phi) + reduce_phase(phi0);
    let second = match mode {
        RamseyMode::LiteralCosine => Complex::new(u * theta.cos(), T::zero()),
        RamseyMode::ComplexPhase => Complex::from_polar(u, theta),
    };
    let zero = Complex::new(T::zero(), T::zero());
    let mut segments = vec![Segment {
        start: T::zero(),
        duration: t_d,
        amplitude: Complex::new(u, T::zero()),
    }];
    if second != zero {
        segments.push(Segment {
            start: t_d + tau,
            duration: t_d,
            amplitude: second,
        });
    }
    Schedule::new(segments, T::zero())
}

fn reduce_phase<T: Real>(phi: T) -> T {
    let tau = T::TAU();
    let r = phi % tau;
    if r < T::zero() {
        r + tau
    } else {
        r
    }
}

fn check_drive<T: Real>(u: T, t_d: T) -> Result<()> {
    if !(u >= T::zero()) || !u.is_finite() {
        return Err(Error::InvalidParameter {
            name: "U",
            reason: "drive rate must be finite and >= 0".into(),
        });
    }
    if !(t_d > T::zero()) || !t_d.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_d",
            reason: "drive length must be finite and > 0".into(),
        });
    }
    Ok(())
}

/// Drive Hamiltonian for envelope value `u` and frame detuning `delta`.
pub fn drive_hamiltonian<T: Real>(u: Complex<T>, delta: T, dim: usize) -> Result<Matrix<T>> {
    let a = make_annihilation::<T>(dim)?;
    let mut h = Matrix::zeros(dim)?;
    // u a^dag + conj(u) a, written entrywise so the result is exactly Hermitian
    for n in 0..dim - 1 {
        let s = a[(n, n + 1)].re;
        h[(n + 1, n)] = u * s;
        h[(n, n + 1)] = u.conj() * s;
    }
    for n in 0..dim {
        h[(n, n)] = Complex::new(-delta * T::from_usize(n).unwrap(), T::zero());
    }
    Ok(h)
}

/// `H(t)` for `schedule` in a `dim`-level truncation.
pub fn hamiltonian_at<T: Real>(schedule: &Schedule<T>, t: T, dim: usize) -> Result<Matrix<T>> {
    drive_hamiltonian(schedule.envelope_at(t), schedule.detuning(), dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{make_creation, make_number};
    use std::f64::consts::PI;

    type C = Complex<f64>;

    #[test]
    fn ring_up_zero_amplitude() {
        let s = ring_up_schedule(0.0, 2e-6).unwrap();
        for t in [0.0, 1e-6, 1.999e-6, 3e-6] {
            assert_eq!(s.envelope_at(t), C::new(0.0, 0.0));
        }
    }

    #[test]
    fn ring_up_window() {
        let u = 4.35e6;
        let s = ring_up_schedule(u, 2e-6).unwrap();
        assert_eq!(s.envelope_at(0.0).re, u);
        assert_eq!(s.envelope_at(1.9999e-6).re, u);
        assert_eq!(s.envelope_at(2e-6).re, 0.0);
        assert_eq!(s.envelope_at(2e-6 + 1e-15).re, 0.0);
        assert_eq!(s.detuning(), 0.0);
        assert_eq!(s.breakpoints(), vec![0.0, 2e-6]);
    }

    #[test]
    fn ring_up_rejects_bad_length() {
        assert!(ring_up_schedule(1.0, 0.0).is_err());
        assert!(ring_up_schedule(1.0, -1e-6).is_err());
        assert!(ring_up_schedule(-1.0, 1e-6).is_err());
    }

    #[test]
    fn ramsey_zero_delay_in_phase_is_one_long_pulse() {
        let t_d = 0.5e-6;
        let r = ramsey_schedule(3e6, t_d, 0.0, 0.0, 0.0, RamseyMode::LiteralCosine).unwrap();
        assert_eq!(r, ring_up_schedule(3e6, 2.0 * t_d).unwrap());
    }

    #[test]
    fn ramsey_quadrature_and_opposite() {
        let u = 3e6;
        let r = ramsey_schedule(u, 1e-6, 0.5e-6, PI / 2.0, 0.0, RamseyMode::LiteralCosine).unwrap();
        assert!(r.envelope_at(2.0e-6).norm() < 1e-9 * u);
        let r = ramsey_schedule(u, 1e-6, 0.5e-6, PI, 0.0, RamseyMode::LiteralCosine).unwrap();
        assert_eq!(r.envelope_at(2.0e-6), C::new(-u, 0.0));
        assert_eq!(r.envelope_at(1.2e-6), C::new(0.0, 0.0));
        let r = ramsey_schedule(u, 1e-6, 0.5e-6, 2.0, 0.5, RamseyMode::ComplexPhase).unwrap();
        let z = r.envelope_at(2.0e-6);
        assert!((z - C::from_polar(u, 2.5)).norm() < 1e-9);
    }

    #[test]
    fn overlapping_segments_rejected() {
        let seg = |start, duration| Segment {
            start,
            duration,
            amplitude: C::new(1.0, 0.0),
        };
        assert!(Schedule::new(vec![seg(0.0, 2.0), seg(1.0, 1.0)], 0.0).is_err());
        assert!(Schedule::new(vec![seg(0.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn hamiltonian_cases() {
        let dim = 6;
        let zero = hamiltonian_at(&Schedule::<f64>::idle(), 0.0, dim).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let u = 2.5;
        let s = ring_up_schedule(u, 1.0).unwrap();
        let h = hamiltonian_at(&s, 0.5, dim).unwrap();
        let a = make_annihilation::<f64>(dim).unwrap();
        let want = (&a + &make_creation(dim).unwrap()).scale_real(u);
        assert!((&h - &want).max_abs() < 1e-14);

        let delta = 7.0;
        let h = hamiltonian_at(&Schedule::idle().with_detuning(delta), 0.0, dim).unwrap();
        let want = make_number::<f64>(dim).unwrap().scale_real(-delta);
        assert_eq!(h, want);
    }

    #[test]
    fn complex_envelope_matches_quadrature_form() {
        let dim = 5;
        let u = C::new(1.3, -0.4);
        let h = drive_hamiltonian(u, 0.0, dim).unwrap();
        let a = make_annihilation::<f64>(dim).unwrap();
        let ad = a.adjoint();
        let i = C::new(0.0, 1.0);
        let want = &(&a + &ad).scale_real(u.re) + &(&ad.scale(i) - &a.scale(i)).scale_real(u.im);
        assert!((&h - &want).max_abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hamiltonian_is_hermitian(re in -1e7f64..1e7, im in -1e7f64..1e7, delta in -1e7f64..1e7, dim in 2usize..30) {
                let h = drive_hamiltonian(C::new(re, im), delta, dim).unwrap();
                prop_assert!(h.hermiticity_error() <= 1e-14 * (1.0 + h.max_abs()));
            }

            // phi + 2 pi is exact for these phases, so the reduced phases coincide
            #[test]
            fn ramsey_phase_periodicity(k in -2300i32..1700, k0 in -3000i32..3000, complex in any::<bool>()) {
                let phi = k as f64 / 1024.0;
                let phi0 = k0 as f64 / 1024.0;
                let mode = if complex { RamseyMode::ComplexPhase } else { RamseyMode::LiteralCosine };
                let a = ramsey_schedule(2e6, 0.5e-6, 0.3e-6, phi, phi0, mode).unwrap();
                let b = ramsey_schedule(2e6, 0.5e-6, 0.3e-6, phi + 2.0 * PI, phi0, mode).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}

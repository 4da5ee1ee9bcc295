//! Closed-form device arithmetic: dispersive shift, Stark-shift readout,
//! coherence-time bookkeeping and the single-excitation avoided crossing.
//!
//! All inputs and outputs are ordinary frequencies (Hz) and seconds.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Device constants. Frequencies are `omega / 2 pi` in Hz.
///
/// The qubit linewidth `gamma_q` is derived as `1 / (pi T2)` (the FWHM of a
/// line with coherence time `T2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub omega_m: f64,
    pub omega_q: f64,
    pub g: f64,
    pub alpha: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub kappa1: f64,
    pub kappa_phi: f64,
    /// Drive-rate calibration, (rad/s) per arbitrary drive unit.
    #[serde(rename = "cal_V_to_U")]
    pub cal_v_to_u: f64,
    /// Overrides the computed `2 chi` (Hz) when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_chi: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl DeviceParams {
    /// Device values reported for the SAW-transmon sample.
    pub fn reference() -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("omega_c".into(), serde_json::json!(4.788e9));
        metadata.insert("E_J".into(), serde_json::json!(19.7e9));
        metadata.insert("E_C".into(), serde_json::json!(318e6));
        Self {
            omega_m: 4457.37e6,
            omega_q: 4220e6,
            g: 9e6,
            alpha: 318e6,
            t1: 494e-9,
            t2: 750e-9,
            kappa1: 480e3,
            kappa_phi: 180e3,
            cal_v_to_u: 4.35e6 / 0.72,
            two_chi: None,
            metadata,
        }
    }

    /// Qubit-mode detuning `Delta = omega_q - omega_m` (Hz).
    pub fn detuning(&self) -> f64 {
        self.omega_q - self.omega_m
    }

    /// `2 chi` in Hz, from the override or from [`chi_shift`].
    pub fn two_chi(&self) -> Result<f64> {
        match self.two_chi {
            Some(v) => Ok(v),
            None => chi_shift(self.g, self.detuning(), self.alpha),
        }
    }

    /// Qubit linewidth `1 / (pi T2)` in Hz.
    pub fn gamma_q(&self) -> f64 {
        1.0 / (PI * self.t2)
    }

    /// Rejects out-of-range values; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive: [(&'static str, f64); 6] = [
            ("omega_m", self.omega_m),
            ("omega_q", self.omega_q),
            ("alpha", self.alpha),
            ("T1", self.t1),
            ("T2", self.t2),
            ("cal_V_to_U", self.cal_v_to_u),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        for (name, v) in [("g", self.g), ("kappa1", self.kappa1), ("kappa_phi", self.kappa_phi)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if let Some(c) = self.two_chi {
            if !c.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "two_chi",
                    reason: "must be finite".into(),
                });
            }
        }
        let mut warnings = Vec::new();
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-9) {
            warnings.push(format!(
                "T2 = {:e} s exceeds 2*T1 = {:e} s; no consistent pure-dephasing time",
                self.t2,
                2.0 * self.t1
            ));
        }
        Ok(warnings)
    }
}

/// Dispersive shift per quantum, `2 chi = -2 g^2 / Delta * alpha / (Delta - alpha)` (Hz).
pub fn chi_shift(g: f64, delta: f64, alpha: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::ResonanceSingularity);
    }
    if delta == alpha {
        return Err(Error::StraddlingSingularity);
    }
    Ok(2.0 * (-g * g / delta) * (alpha / (delta - alpha)))
}

/// Mean occupation inferred from a qubit line shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub nbar: f64,
    /// Set when the shift has the opposite sign to `2 chi`; the value is kept.
    pub negative: bool,
}

/// `nbar = (dressed - bare) / 2chi`. Negative values are flagged, not clipped.
pub fn nbar_from_shift(dressed_freq: f64, bare_freq: f64, two_chi: f64) -> Result<OccupationEstimate> {
    if two_chi == 0.0 {
        return Err(Error::ZeroShift);
    }
    let nbar = (dressed_freq - bare_freq) / two_chi;
    Ok(OccupationEstimate {
        nbar,
        negative: nbar < 0.0,
    })
}

/// `1 / T_phi = 1 / T2 - 1 / (2 T1)`.
pub fn pure_dephasing_time(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "T1/T2",
            reason: "coherence times must be > 0".into(),
        });
    }
    if t2 >= 2.0 * t1 {
        return Err(Error::NoPureDephasing { t2, two_t1: 2.0 * t1 });
    }
    Ok(1.0 / (1.0 / t2 - 1.0 / (2.0 * t1)))
}

/// Total mode decoherence rate `kappa1 / 2 + kappa_phi` (Hz).
pub fn total_decoherence_rate(kappa1: f64, kappa_phi: f64) -> f64 {
    kappa1 / 2.0 + kappa_phi
}

/// Steady-state spectroscopy FWHM (Hz) of the master equation with loss
/// `kappa1` and dephasing prefactor `kappa_phi / 2`: the coherence decays at
/// `kappa1 / 2 + kappa_phi / 4`, so the FWHM is `kappa1 + kappa_phi / 2`.
pub fn master_equation_fwhm(kappa1: f64, kappa_phi: f64) -> f64 {
    kappa1 + kappa_phi / 2.0
}

/// Dressed branches `(upper, lower)` of the single-excitation qubit-mode problem:
/// `(omega_q + omega_m) / 2 +- sqrt(Delta^2 / 4 + g^2)`.
pub fn avoided_crossing_branches(omega_q_bare: f64, omega_m: f64, g: f64) -> Result<(f64, f64)> {
    if !(g >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "g",
            reason: "coupling must be >= 0".into(),
        });
    }
    let mean = 0.5 * (omega_q_bare + omega_m);
    let half_delta = 0.5 * (omega_q_bare - omega_m);
    let r = half_delta.hypot(g);
    Ok((mean + r, mean - r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersiveRegime {
    Weak,
    Strong,
}

/// Weak iff `|2 chi| < max(gamma_q, kappa)`.
pub fn classify_dispersive_regime(two_chi: f64, gamma_q: f64, kappa: f64) -> DispersiveRegime {
    if two_chi.abs() < gamma_q.max(kappa) {
        DispersiveRegime::Weak
    } else {
        DispersiveRegime::Strong
    }
}

/// Lorentzian qubit line: `offset + amplitude / (1 + (2 (f - center) / fwhm)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpectrumModel {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl QubitSpectrumModel {
    pub fn new(center: f64, fwhm: f64, amplitude: f64, offset: f64) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fwhm",
                reason: "linewidth must be > 0".into(),
            });
        }
        Ok(Self {
            center,
            fwhm,
            amplitude,
            offset,
        })
    }

    pub fn eval(&self, f: f64) -> f64 {
        lorentzian(f, self.center, self.fwhm, self.amplitude, self.offset)
    }
}

#[inline]
pub fn lorentzian(f: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let x = 2.0 * (f - center) / fwhm;
    offset + amplitude / (1.0 + x * x)
}

/// Qubit spectrum with its center pulled by `two_chi * nbar`.
pub fn stark_shifted_spectrum(
    model: &QubitSpectrumModel,
    two_chi: f64,
    nbar: f64,
    freq_axis: &[f64],
) -> Result<Vec<f64>> {
    let shifted = QubitSpectrumModel::new(model.center + two_chi * nbar, model.fwhm, model.amplitude, model.offset)?;
    Ok(freq_axis.iter().map(|&f| shifted.eval(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_reference_value() {
        let two_chi = chi_shift(9e6, 4220e6 - 4457.37e6, 318e6).unwrap();
        assert!((two_chi / 1e6 - (-0.391)).abs() < 5e-4, "{two_chi}");
        assert!((two_chi - (-0.4e6)).abs() / 0.4e6 < 0.03);
    }

    #[test]
    fn chi_scaling_and_zero() {
        assert_eq!(chi_shift(0.0, -200e6, 318e6).unwrap(), 0.0);
        let a = chi_shift(9e6, -237e6, 318e6).unwrap();
        let b = chi_shift(18e6, -237e6, 318e6).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn chi_singularities() {
        assert!(matches!(chi_shift(9e6, 0.0, 318e6), Err(Error::ResonanceSingularity)));
        assert!(matches!(chi_shift(9e6, 318e6, 318e6), Err(Error::StraddlingSingularity)));
    }

    #[test]
    fn nbar_cases() {
        assert_eq!(nbar_from_shift(4.22e9, 4.22e9, -0.4e6).unwrap().nbar, 0.0);
        let one = nbar_from_shift(4.22e9 - 0.4e6, 4.22e9, -0.4e6).unwrap();
        assert!((one.nbar - 1.0).abs() < 1e-9);
        let n = nbar_from_shift(-3.2e6, 0.0, -0.391e6).unwrap();
        assert!((n.nbar - 8.184).abs() < 1e-3);
        let neg = nbar_from_shift(0.1e6, 0.0, -0.4e6).unwrap();
        assert!(neg.negative && neg.nbar < 0.0);
        assert!(matches!(nbar_from_shift(1.0, 0.0, 0.0), Err(Error::ZeroShift)));
    }

    #[test]
    fn nbar_from_simulated_spectrum() {
        // locate the peak of a Stark-shifted line on a fine axis and invert it
        let model = QubitSpectrumModel::new(4.22e9, 0.42e6, 1.0, 0.0).unwrap();
        let two_chi = -0.391e6;
        let axis: Vec<f64> = (0..=20000).map(|i| 4.21e9 + i as f64 * 1e3).collect();
        let spec = stark_shifted_spectrum(&model, two_chi, 8.184, &axis).unwrap();
        let (imax, _) = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let n = nbar_from_shift(axis[imax], model.center, two_chi).unwrap();
        assert!((n.nbar - 8.18).abs() < 0.01, "{}", n.nbar);
    }

    #[test]
    fn dephasing_time_reference() {
        let tphi = pure_dephasing_time(494e-9, 750e-9).unwrap();
        assert!((tphi - 3.11e-6).abs() / 3.11e-6 < 0.01, "{tphi}");
        assert!(matches!(
            pure_dephasing_time(494e-9, 988e-9),
            Err(Error::NoPureDephasing { .. })
        ));
        let tphi = pure_dephasing_time(1.0, 1e-3).unwrap();
        assert!((tphi - 1e-3).abs() / 1e-3 < 1e-3);
    }

    #[test]
    fn total_rate_reference_and_linearity() {
        assert_eq!(total_decoherence_rate(480e3, 180e3), 420e3);
        assert_eq!(total_decoherence_rate(480e3, 0.0), 240e3);
        assert_eq!(total_decoherence_rate(0.0, 180e3), 180e3);
        let (a, b, c, d) = (1.0e5, 3.0e4, 2.5e5, 7.0e4);
        let lhs = total_decoherence_rate(a + c, b + d);
        let rhs = total_decoherence_rate(a, b) + total_decoherence_rate(c, d);
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn avoided_crossing_cases() {
        let (up, lo) = avoided_crossing_branches(4457.37e6, 4457.37e6, 9e6).unwrap();
        assert!(((up - lo) - 18e6).abs() < 1e-6 * 18e6);
        let (up, lo) = avoided_crossing_branches(4.3e9, 4.4e9, 0.0).unwrap();
        assert_eq!((up, lo), (4.4e9, 4.3e9));
        let g = 9e6;
        let wm = 4457.37e6;
        let wq = wm + 100.0 * g;
        let (up, _) = avoided_crossing_branches(wq, wm, g).unwrap();
        let approx = wq + g * g / (wq - wm);
        assert!((up - approx).abs() / approx < 5e-5);
    }

    #[test]
    fn regime_classification() {
        let gamma_q = 1.0 / (PI * 750e-9);
        assert!((gamma_q - 0.424e6).abs() < 1e3);
        assert_eq!(classify_dispersive_regime(-0.4e6, gamma_q, 0.43e6), DispersiveRegime::Weak);
        assert_eq!(classify_dispersive_regime(0.0, 1.0, 0.0), DispersiveRegime::Weak);
        assert_eq!(classify_dispersive_regime(10e6, 0.1e6, 0.1e6), DispersiveRegime::Strong);
    }

    #[test]
    fn stark_spectrum_moves_left_with_occupation() {
        let model = QubitSpectrumModel::new(4.22e9, 0.42e6, 1.0, 0.0).unwrap();
        let axis: Vec<f64> = (0..=4000).map(|i| 4.214e9 + i as f64 * 2e3).collect();
        let peak = |nbar: f64| {
            let s = stark_shifted_spectrum(&model, -0.4e6, nbar, &axis).unwrap();
            let i = s
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            axis[i]
        };
        assert_eq!(peak(0.0), 4.22e9);
        assert!((peak(1.0) - (4.22e9 - 0.4e6)).abs() < 2e3);
        let peaks: Vec<f64> = [0.0, 2.0, 4.0, 8.0, 12.0].iter().map(|&n| peak(n)).collect();
        assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
    }

    #[test]
    fn reference_device_validates() {
        let d = DeviceParams::reference();
        assert!(d.validate().unwrap().is_empty());
        assert!((d.two_chi().unwrap() + 0.391e6).abs() < 1e3);
        let mut bad = d.clone();
        bad.kappa1 = -1.0;
        assert!(matches!(bad.validate(), Err(Error::InvalidParameter { name: "kappa1", .. })));
        let mut flagged = d;
        flagged.t2 = 3.0 * flagged.t1;
        assert_eq!(flagged.validate().unwrap().len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn branches_ordered_and_min_split_is_2g(wm in 4e9f64..5e9, g in 1e5f64..5e7, d in -5e8f64..5e8) {
                let (up, lo) = avoided_crossing_branches(wm + d, wm, g).unwrap();
                prop_assert!(up >= lo);
                prop_assert!(up - lo >= 2.0 * g * (1.0 - 1e-12));
                let (up0, lo0) = avoided_crossing_branches(wm, wm, g).unwrap();
                prop_assert!(((up0 - lo0) - 2.0 * g).abs() <= 1e-9 * 2.0 * g + 1e-6);
            }

            #[test]
            fn readout_round_trip(nbar in 0.0f64..50.0, two_chi in -1e6f64..-1e3, center in 4e9f64..5e9) {
                let shifted = center + two_chi * nbar;
                let back = nbar_from_shift(shifted, center, two_chi).unwrap();
                prop_assert!((back.nbar - nbar).abs() <= 1e-9 * (1.0 + nbar) * center / two_chi.abs());
            }
        }
    }
}

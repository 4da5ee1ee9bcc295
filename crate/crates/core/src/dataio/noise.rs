//! Seeded Gaussian noise for synthetic data.
//!
//! Draws come from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`), one standard normal per point in
//! storage order (row-major for grids).

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::{ExperimentSeries, RamseyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_abs: f64,
    pub sigma_rel: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_abs", self.sigma_abs), ("sigma_rel", self.sigma_rel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.sigma_abs == 0.0 && self.sigma_rel == 0.0
    }

    fn apply(&self, values: &mut [f64], sigmas: &mut [f64]) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(self.seed);
        for (v, s) in values.iter_mut().zip(sigmas.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            let sigma = self.sigma_abs + self.sigma_rel * v.abs();
            *v += sigma * z;
            *s = s.hypot(sigma);
        }
    }
}

pub trait Noisy: Sized {
    /// Copy with noise added and `sigma` combined in quadrature.
    fn with_noise(&self, noise: &NoiseModel) -> Self;
}

impl Noisy for ExperimentSeries {
    fn with_noise(&self, noise: &NoiseModel) -> Self {
        let mut out = self.clone();
        noise.apply(&mut out.nbar, &mut out.sigma);
        out
    }
}

impl Noisy for RamseyGrid {
    fn with_noise(&self, noise: &NoiseModel) -> Self {
        let mut values: Vec<f64> = self.nbar.iter().flatten().copied().collect();
        let mut sigmas: Vec<f64> = self.sigma.iter().flatten().copied().collect();
        noise.apply(&mut values, &mut sigmas);
        let cols = self.phis.len().max(1);
        let mut out = self.clone();
        out.nbar = values.chunks(cols).map(<[f64]>::to_vec).collect();
        out.sigma = sigmas.chunks(cols).map(<[f64]>::to_vec).collect();
        out
    }
}

pub fn add_noise<D: Noisy>(data: &D, noise: &NoiseModel) -> D {
    data.with_noise(noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::SeriesKind;

    fn series(n: usize, value: f64) -> ExperimentSeries {
        ExperimentSeries::new(
            (0..n).map(|i| i as f64).collect(),
            vec![value; n],
            vec![0.0; n],
            SeriesKind::RingUpRingDown,
        )
        .unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = series(10, 3.0);
        assert_eq!(add_noise(&s, &NoiseModel { seed: 9, ..NoiseModel::default() }), s);
    }

    #[test]
    fn same_seed_same_output() {
        let s = series(100, 3.0);
        let n = NoiseModel {
            sigma_abs: 0.1,
            sigma_rel: 0.05,
            seed: 17,
        };
        assert_eq!(add_noise(&s, &n), add_noise(&s, &n));
        let other = NoiseModel { seed: 18, ..n };
        assert_ne!(add_noise(&s, &n), add_noise(&s, &other));
    }

    #[test]
    fn sample_standard_deviation() {
        let n = 100_000;
        let s = add_noise(
            &series(n, 0.0),
            &NoiseModel {
                sigma_abs: 0.1,
                sigma_rel: 0.0,
                seed: 1,
            },
        );
        let mean = s.nbar.iter().sum::<f64>() / n as f64;
        let var = s.nbar.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.001, "{}", var.sqrt());
        assert!(s.sigma.iter().all(|&x| x == 0.1));
    }

    #[test]
    fn relative_sigma_and_quadrature() {
        let mut s = series(3, -2.0);
        s.sigma = vec![0.3; 3];
        let out = add_noise(
            &s,
            &NoiseModel {
                sigma_abs: 0.0,
                sigma_rel: 0.2,
                seed: 0,
            },
        );
        for &x in &out.sigma {
            assert!((x - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_shape_is_kept() {
        let g = RamseyGrid::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0], vec![vec![1.0; 3]; 2], vec![vec![0.0; 3]; 2]).unwrap();
        let out = add_noise(
            &g,
            &NoiseModel {
                sigma_abs: 0.1,
                sigma_rel: 0.0,
                seed: 5,
            },
        );
        assert_eq!(out.nbar.len(), 2);
        assert!(out.nbar.iter().all(|r| r.len() == 3));
        assert_ne!(out.nbar, g.nbar);
    }

    #[test]
    fn negative_sigma_rejected() {
        let n = NoiseModel {
            sigma_abs: -1.0,
            ..NoiseModel::default()
        };
        assert!(n.validate().is_err());
    }
}

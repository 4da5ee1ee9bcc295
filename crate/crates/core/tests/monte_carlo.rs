//! Seeded Monte-Carlo checks of the estimators at realistic noise levels.

use std::f64::consts::PI;

use rayon::prelude::*;

use phonolab::dataio::{add_noise, NoiseModel};
use phonolab::dispersive::{lorentzian, DeviceParams};
use phonolab::estimation::{fit_lorentzian, fit_ramsey, fit_ring_up_ring_down, FitResult, OptimizeOptions, RamseyFit, RingUpFit};
use phonolab::protocols::{simulate_ramsey, simulate_ring_up_ring_down, ExperimentSeries, SeriesKind, SimSettings};
use phonolab::pulses::RamseyMode;

const SEEDS: u64 = 100;

fn device(k1: f64, kphi: f64) -> DeviceParams {
    DeviceParams {
        kappa1: k1,
        kappa_phi: kphi,
        ..DeviceParams::reference()
    }
}

fn relative(seed: u64) -> NoiseModel {
    NoiseModel {
        sigma_abs: 0.0,
        sigma_rel: 0.05,
        seed,
    }
}

/// Mean deviation from truth and mean reported sigma of one parameter.
fn bias_and_sigma(fits: &[FitResult], name: &str, truth: f64) -> (f64, f64) {
    let n = fits.len() as f64;
    let bias = fits.iter().map(|f| f.params[name] - truth).sum::<f64>() / n;
    let sigma = fits.iter().map(|f| f.sigmas[name]).sum::<f64>() / n;
    (bias, sigma)
}

#[test]
fn lorentzian_linewidth_within_27_khz() {
    let (center, fwhm) = (4457.37e6, 430e3);
    let axis: Vec<f64> = (0..81).map(|i| center - 2e6 + 50e3 * i as f64).collect();
    let clean: Vec<f64> = axis.iter().map(|&f| lorentzian(f, center, fwhm, 1.0, 0.0)).collect();
    let series = ExperimentSeries::new(axis, clean, vec![0.0; 81], SeriesKind::Spectroscopy).unwrap();
    let fits: Vec<FitResult> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let noise = NoiseModel {
                sigma_abs: 0.03,
                sigma_rel: 0.0,
                seed,
            };
            fit_lorentzian(&add_noise(&series, &noise), &OptimizeOptions::default()).unwrap()
        })
        .collect();
    let hits = fits.iter().filter(|f| (f.params["fwhm"] - fwhm).abs() <= 27e3).count();
    assert!(hits >= 90, "{hits}/100 within 27 kHz");
    let (bias, sigma) = bias_and_sigma(&fits, "fwhm", fwhm);
    assert!(bias.abs() < sigma, "bias {bias} vs sigma {sigma}");
    let (bias, sigma) = bias_and_sigma(&fits, "center", center);
    assert!(bias.abs() < sigma, "bias {bias} vs sigma {sigma}");
}

#[test]
fn ring_up_estimator_is_consistent() {
    let times: Vec<f64> = (1..=50).map(|i| i as f64 * 0.1e-6).collect();
    let (u, k1) = (4.35e6, 480e3);
    let clean = simulate_ring_up_ring_down(&device(k1, 0.0), u, 2e-6, &times, &SimSettings::moments())
        .unwrap()
        .output;
    let mut setup = RingUpFit::new(2e-6, 3.5e6, 400e3);
    setup.verify = false;
    let fits: Vec<FitResult> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| fit_ring_up_ring_down(&add_noise(&clean, &relative(seed)), &setup).unwrap())
        .collect();
    let hits = fits.iter().filter(|f| (f.params["kappa1"] - k1).abs() <= 30e3).count();
    assert!(hits >= 90, "{hits}/100 within 30 kHz");
    for (name, truth) in [("U", u), ("kappa1", k1)] {
        let (bias, sigma) = bias_and_sigma(&fits, name, truth);
        assert!(bias.abs() < sigma, "{name}: bias {bias} vs sigma {sigma}");
    }
}

#[test]
fn ramsey_estimator_is_consistent() {
    let taus: Vec<f64> = (0..16).map(|i| i as f64 * 0.16e-6).collect();
    let phis: Vec<f64> = (0..12).map(|j| j as f64 * PI / 6.0).collect();
    let (u, k1, kphi, phi0) = (4.35e6, 480e3, 180e3, 0.3);
    let clean = simulate_ramsey(
        &device(k1, kphi),
        u,
        0.5e-6,
        &taus,
        &phis,
        phi0,
        RamseyMode::LiteralCosine,
        &SimSettings::moments(),
    )
    .unwrap()
    .output;
    let mut setup = RamseyFit::new(0.5e-6, 3.8e6, 420e3, 250e3, 0.0, RamseyMode::LiteralCosine);
    setup.verify = false;
    let fits: Vec<FitResult> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| fit_ramsey(&add_noise(&clean, &relative(500 + seed)), &setup).unwrap())
        .collect();
    let hits = fits.iter().filter(|f| (f.params["kappa_phi"] - kphi).abs() <= 20e3).count();
    assert!(hits >= 90, "{hits}/100 within 20 kHz");
    for (name, truth) in [("U", u), ("kappa1", k1), ("kappa_phi", kphi), ("phi0", phi0)] {
        let (bias, sigma) = bias_and_sigma(&fits, name, truth);
        assert!(bias.abs() < sigma, "{name}: bias {bias} vs sigma {sigma}");
    }
}

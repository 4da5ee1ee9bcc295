//! Lorentzian line fits to spectra.

use crate::dispersive::lorentzian;
use crate::error::{Error, Result};
use crate::protocols::ExperimentSeries;

use super::{effective_sigma, fit_params, Coord, FitResult, OptimizeOptions, Param, ParamSpec};

/// Starting point `(center, fwhm, amplitude, offset)` read off the data:
/// the highest point, its half-maximum crossings and the lowest point.
pub fn lorentzian_guess(axis: &[f64], values: &[f64]) -> (f64, f64, f64, f64) {
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let half = 0.5 * (vmax + vmin);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if values[i] < half {
                let t = (values[prev] - half) / (values[prev] - values[i]);
                return Some(axis[prev] + t * (axis[i] - axis[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..values.len()));
    let center = axis[imax];
    let span = axis.iter().copied().fold(f64::NEG_INFINITY, f64::max) - axis.iter().copied().fold(f64::INFINITY, f64::min);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => (r - l).abs(),
        (Some(l), None) => 2.0 * (center - l).abs(),
        (None, Some(r)) => 2.0 * (r - center).abs(),
        (None, None) => 0.25 * span,
    };
    let fwhm = if fwhm > 0.0 { fwhm } else { 0.25 * span };
    (center, fwhm, vmax - vmin, vmin)
}

/// Fits `offset + amplitude / (1 + (2 (f - center) / fwhm)^2)` to a series.
pub fn fit_lorentzian(series: &ExperimentSeries, opts: &OptimizeOptions) -> Result<FitResult> {
    let n = series.len();
    if n < 5 {
        return Err(Error::Precondition(format!("a Lorentzian fit needs >= 5 points, got {n}")));
    }
    if series.axis.iter().chain(&series.nbar).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("series contains non-finite values".into()));
    }
    let vmax = series.nbar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = series.nbar.iter().copied().fold(f64::INFINITY, f64::min);
    if vmax == vmin {
        return Err(Error::NonIdentifiable("constant data has no line to fit".into()));
    }
    let first = series.axis[0];
    if series.axis.iter().all(|&f| f == first) {
        return Err(Error::NonIdentifiable("all points share one axis value".into()));
    }
    let (center, fwhm, amplitude, offset) = lorentzian_guess(&series.axis, &series.nbar);
    let scale = amplitude.abs();
    let params = [
        Param {
            name: "center",
            spec: ParamSpec::free(center),
            coord: Coord::Linear { scale: fwhm },
        },
        Param {
            name: "fwhm",
            spec: ParamSpec::free(fwhm),
            coord: Coord::Log,
        },
        Param {
            name: "amplitude",
            spec: ParamSpec::free(amplitude),
            coord: Coord::Linear { scale },
        },
        Param {
            name: "offset",
            spec: ParamSpec::free(offset),
            coord: Coord::Linear { scale },
        },
    ];
    let sigma = effective_sigma(&series.sigma);
    fit_params(
        &params,
        |v| {
            Ok(series
                .axis
                .iter()
                .zip(&series.nbar)
                .zip(&sigma)
                .map(|((&f, &y), &s)| (lorentzian(f, v[0], v[1], v[2], v[3]) - y) / s)
                .collect())
        },
        opts,
    )
}

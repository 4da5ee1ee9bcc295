//! Ordinary (Hz) vs angular (rad/s) frequency conversion and SI-suffix parsing.
//!
//! Everything public is quoted in Hz (`omega / 2 pi`); dynamics run in rad/s.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    f * TAU
}

#[inline]
pub fn angular_to_hz(w: f64) -> f64 {
    w / TAU
}

/// Parses a number with an optional SI suffix: `k`, `M`, `G` (also `m`, `u`, `n`).
///
/// `"9M"` is `9e6`, `"480k"` is `4.8e5`, `"494n"` is `4.94e-7`.
pub fn parse_si(text: &str) -> Result<f64> {
    let t = text.trim();
    let exp = match t.chars().last() {
        Some('k') => Some(3),
        Some('M') => Some(6),
        Some('G') => Some(9),
        Some('m') => Some(-3),
        Some('u') => Some(-6),
        Some('n') => Some(-9),
        _ => None,
    };
    let num = match exp {
        Some(_) => t[..t.len() - 1].trim(),
        None => t,
    };
    let bad = || Error::InvalidParameter {
        name: "number",
        reason: format!("cannot parse `{text}` as a number with optional SI suffix"),
    };
    // splice the suffix into the exponent so "4.22G" parses to the nearest double of 4.22e9
    let v: f64 = match exp {
        Some(e) if !num.contains(['e', 'E']) => format!("{num}e{e}").parse().map_err(|_| bad())?,
        Some(e) => num.parse::<f64>().map_err(|_| bad())? * 10f64.powi(e),
        None => num.parse().map_err(|_| bad())?,
    };
    if !v.is_finite() {
        return Err(Error::InvalidParameter {
            name: "number",
            reason: format!("`{text}` is not finite"),
        });
    }
    Ok(v)
}

/// Formats a frequency in Hz with an engineering prefix, e.g. `-390.8 kHz`.
pub fn format_hz(f: f64) -> String {
    let a = f.abs();
    if a >= 1e9 {
        format!("{:.4} GHz", f / 1e9)
    } else if a >= 1e6 {
        format!("{:.4} MHz", f / 1e6)
    } else if a >= 1e3 {
        format!("{:.2} kHz", f / 1e3)
    } else {
        format!("{:.3} Hz", f)
    }
}

/// Formats a duration in seconds, e.g. `3.113 us`.
pub fn format_seconds(t: f64) -> String {
    let a = t.abs();
    if a >= 1.0 {
        format!("{:.4} s", t)
    } else if a >= 1e-3 {
        format!("{:.4} ms", t * 1e3)
    } else if a >= 1e-6 {
        format!("{:.4} us", t * 1e6)
    } else {
        format!("{:.3} ns", t * 1e9)
    }
}

//! JSON fit reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dispersive::{master_equation_fwhm, total_decoherence_rate};
use crate::error::{Error, Result};
use crate::estimation::FitResult;

use super::config::SCHEMA_VERSION;

/// Time-domain rates against the spectroscopic linewidth, all in Hz.
///
/// Two conventions are reported for the linewidth implied by `kappa1` and
/// `kappa_phi`: the quoted `kappa1/2 + kappa_phi`, and `kappa1 + kappa_phi/2`,
/// the FWHM of the steady-state `nbar` spectrum of the master equation used here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheck {
    pub kappa1: f64,
    pub kappa_phi: f64,
    pub kappa_quoted: f64,
    pub kappa_master_equation_fwhm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectroscopic_fwhm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_quoted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_to_master_equation: Option<f64>,
}

impl CrossCheck {
    pub fn new(kappa1: f64, kappa_phi: f64, spectroscopic_fwhm: Option<f64>) -> Self {
        let quoted = total_decoherence_rate(kappa1, kappa_phi);
        let me = master_equation_fwhm(kappa1, kappa_phi);
        Self {
            kappa1,
            kappa_phi,
            kappa_quoted: quoted,
            kappa_master_equation_fwhm: me,
            spectroscopic_fwhm,
            ratio_to_quoted: spectroscopic_fwhm.map(|f| f / quoted),
            ratio_to_master_equation: spectroscopic_fwhm.map(|f| f / me),
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "kappa1/2 + kappa_phi = {:.1} kHz; kappa1 + kappa_phi/2 = {:.1} kHz",
            self.kappa_quoted / 1e3,
            self.kappa_master_equation_fwhm / 1e3
        );
        if let Some(f) = self.spectroscopic_fwhm {
            s += &format!("; spectroscopic FWHM = {:.1} kHz", f / 1e3);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub schema_version: u32,
    pub protocol: String,
    /// Unit of each reported parameter.
    pub units: BTreeMap<String, String>,
    pub fit: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
}

impl FitReport {
    pub fn new(protocol: &str, fit: FitResult) -> Self {
        let mut units = BTreeMap::new();
        for name in fit.params.keys().chain(fit.fixed.keys()) {
            let unit = match name.as_str() {
                "U" => "rad/s",
                "kappa1" | "kappa_phi" | "center" | "fwhm" => "Hz",
                "phi0" => "rad",
                "t_d" => "s",
                _ => "1",
            };
            units.insert(name.clone(), unit.to_string());
        }
        let cross_check = match (fit.param("kappa1"), fit.param("kappa_phi")) {
            (Some(k1), Some(kp)) => Some(CrossCheck::new(k1, kp, None)),
            _ => None,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            protocol: protocol.to_string(),
            units,
            fit,
            cross_check,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Config {
            path: ".".into(),
            message: e.to_string(),
        })?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }
}

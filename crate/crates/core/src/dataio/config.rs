//! JSON run configuration.
//!
//! All frequencies and rates in the file are in Hz; the drive rate `U` is
//! angular (rad/s) unless `u_units` says `"hz"`. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispersive::DeviceParams;
use crate::error::{Error, Result};
use crate::lindblad::SolverOptions;
use crate::protocols::SimSettings;
use crate::pulses::RamseyMode;
use crate::units::hz_to_angular;

use super::noise::NoiseModel;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub device: DeviceParams,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ProtocolConfig {
    Ringupdown {
        drive: Drive,
        t_d: f64,
        times: AxisSpec,
    },
    Ramsey {
        drive: Drive,
        t_d: f64,
        taus: AxisSpec,
        phis: AxisSpec,
        #[serde(default)]
        phi0: f64,
        #[serde(default)]
        mode: RamseyMode,
    },
    Spectroscopy {
        drive: Drive,
        t_d: f64,
        /// Drive detunings from the mode (Hz).
        deltas: AxisSpec,
    },
}

impl ProtocolConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ringupdown { .. } => "ringupdown",
            Self::Ramsey { .. } => "ramsey",
            Self::Spectroscopy { .. } => "spectroscopy",
        }
    }

    pub fn drive(&self) -> &Drive {
        match self {
            Self::Ringupdown { drive, .. } | Self::Ramsey { drive, .. } | Self::Spectroscopy { drive, .. } => drive,
        }
    }

    pub fn t_d(&self) -> f64 {
        match self {
            Self::Ringupdown { t_d, .. } | Self::Ramsey { t_d, .. } | Self::Spectroscopy { t_d, .. } => *t_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UUnits {
    /// rad/s
    #[default]
    Angular,
    /// Hz, multiplied by 2 pi on use.
    Hz,
}

/// Drive strength, either as a rate `U` or as an amplitude `V` converted
/// through the device's `cal_V_to_U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default)]
    pub u_units: UUnits,
}

impl Drive {
    pub fn rate(u: f64) -> Self {
        Self {
            u: Some(u),
            v: None,
            u_units: UUnits::Angular,
        }
    }

    /// Drive rate in rad/s.
    pub fn angular(&self, device: &DeviceParams) -> Result<f64> {
        let u = match (self.u, self.v) {
            (Some(u), None) => match self.u_units {
                UUnits::Angular => u,
                UUnits::Hz => hz_to_angular(u),
            },
            (None, Some(v)) => device.cal_v_to_u * v,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "drive",
                    reason: "give exactly one of U and V".into(),
                })
            }
        };
        if !(u >= 0.0 && u.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "drive",
                reason: format!("drive rate {u} must be finite and >= 0"),
            });
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum AxisSpec {
    Linspace { start: f64, stop: f64, num: usize },
    Values(Vec<f64>),
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Linspace { start, stop, num } => match num {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| {
                        if i == n - 1 {
                            *stop
                        } else {
                            start + (stop - start) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_override: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            dim_override: None,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SimSettings {
        SimSettings {
            solver: SolverOptions {
                rtol: self.rel_tol,
                atol: self.abs_tol,
                ..SolverOptions::default()
            },
            dim_override: self.dim_override,
            ..SimSettings::default()
        }
    }
}

fn config_error(path: &str, err: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.to_string(),
        message: err.to_string(),
    }
}

impl RunConfig {
    /// Checks values serde cannot; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let warnings = self.device.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_error(&format!("device.{name}"), reason),
            other => other,
        })?;
        let prefix = format!("protocol.{}", self.protocol.name());
        self.protocol
            .drive()
            .angular(&self.device)
            .map_err(|e| config_error(&format!("{prefix}.drive"), e))?;
        let t_d = self.protocol.t_d();
        if !(t_d > 0.0 && t_d.is_finite()) {
            return Err(config_error(&format!("{prefix}.t_d"), format!("must be finite and > 0, got {t_d}")));
        }
        let axes: Vec<(&str, &AxisSpec)> = match &self.protocol {
            ProtocolConfig::Ringupdown { times, .. } => vec![("times", times)],
            ProtocolConfig::Ramsey { taus, phis, .. } => vec![("taus", taus), ("phis", phis)],
            ProtocolConfig::Spectroscopy { deltas, .. } => vec![("deltas", deltas)],
        };
        for (name, axis) in axes {
            let v = axis.values();
            if v.is_empty() {
                return Err(config_error(&format!("{prefix}.{name}"), "axis is empty"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(config_error(&format!("{prefix}.{name}"), "axis contains non-finite values"));
            }
            if matches!(name, "times" | "taus") && v.iter().any(|&x| x < 0.0) {
                return Err(config_error(&format!("{prefix}.{name}"), "times must be >= 0"));
            }
        }
        if let ProtocolConfig::Ramsey { phi0, .. } = &self.protocol {
            if !phi0.is_finite() {
                return Err(config_error(&format!("{prefix}.phi0"), "must be finite"));
            }
        }
        self.noise.validate().map_err(|e| config_error("noise", e))?;
        for (name, v) in [("rel_tol", self.solver.rel_tol), ("abs_tol", self.solver.abs_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_error(&format!("solver.{name}"), format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(warnings)
    }
}

/// Parses and validates a configuration; errors carry the JSON path.
pub fn load_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config_file(path: &Path) -> Result<RunConfig> {
    load_config(&std::fs::read_to_string(path)?)
}

pub fn save_config(config: &RunConfig) -> Result<String> {
    let mut s = serde_json::to_string_pretty(config).map_err(|e| config_error(".", e))?;
    s.push('\n');
    Ok(s)
}

//! Experiment configuration and curve-file schemas.
//!
//! Configs are versioned JSON documents; curve files are bare JSON arrays of
//! per-depth records, which is also the ingestion format for externally
//! measured data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CsbError, Result};
use crate::fitting::FitModel;
use crate::noise::NoiseTriple;
use crate::protocol::DecayCurve;

pub const CONFIG_SCHEMA: &str = "csb-config/1";

/// Noise selection: an explicit triple or "calibrated:<target>[:<tolerance>]".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseConfig {
    Calibrated(String),
    Explicit(Box<NoiseTriple>),
}

/// Parsed form of the "calibrated:..." string.
pub fn parse_calibration_request(s: &str) -> Result<(f64, f64)> {
    let rest = s
        .strip_prefix("calibrated:")
        .ok_or_else(|| CsbError::Config(format!("unrecognized noise spec string '{s}'")))?;
    let mut parts = rest.splitn(2, ':');
    let target: f64 = parts
        .next()
        .unwrap_or("")
        .parse()
        .map_err(|_| CsbError::Config(format!("bad calibration target in '{s}'")))?;
    let tolerance = match parts.next() {
        Some(t) => t
            .parse()
            .map_err(|_| CsbError::Config(format!("bad calibration tolerance in '{s}'")))?,
        None => 0.005,
    };
    Ok((target, tolerance))
}

fn default_amp_threshold() -> f64 {
    0.01
}

fn default_phase_threshold() -> f64 {
    std::f64::consts::FRAC_PI_2
}

fn default_model() -> FitModel {
    FitModel::SixTermOpt
}

/// Fitting model and filtering thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    #[serde(default = "default_model")]
    pub model: FitModel,
    #[serde(default = "default_amp_threshold")]
    pub amp_threshold: f64,
    #[serde(default = "default_phase_threshold")]
    pub phase_threshold: f64,
    /// Weight fit residuals by inverse binomial deviation (off by default).
    #[serde(default)]
    pub weighted: bool,
    /// Seeded optimizer restarts beyond the deterministic initialization.
    #[serde(default)]
    pub restarts: u32,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            model: default_model(),
            amp_threshold: default_amp_threshold(),
            phase_threshold: default_phase_threshold(),
            weighted: false,
            restarts: 0,
        }
    }
}

fn default_resamples() -> usize {
    2000
}

fn default_lower_quantile() -> f64 {
    0.025
}

fn default_upper_quantile() -> f64 {
    0.975
}

/// Bootstrap interval settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_lower_quantile")]
    pub lower_quantile: f64,
    #[serde(default = "default_upper_quantile")]
    pub upper_quantile: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            resamples: default_resamples(),
            lower_quantile: default_lower_quantile(),
            upper_quantile: default_upper_quantile(),
        }
    }
}

/// Calibration request and its resolved parameters, echoed into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEcho {
    pub target: f64,
    pub tolerance: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Full experiment description. Simulation fills the `resolved_*` fields so
/// the echoed config re-runs the identical pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: String,
    /// "toffoli" or a path to a JSON unitary matrix (rows of [re, im] pairs).
    pub gate: String,
    pub noise: NoiseConfig,
    pub shots: u32,
    pub l_max: u32,
    pub seed: u64,
    /// Record exact probabilities instead of shot averages.
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_noise: Option<Box<NoiseTriple>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationEcho>,
}

impl ExperimentConfig {
    /// The default Toffoli benchmarking setup: calibrated noise near 0.89,
    /// 1000 shots, depths 0..=40.
    pub fn default_toffoli(seed: u64) -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            gate: "toffoli".into(),
            noise: NoiseConfig::Calibrated("calibrated:0.890".into()),
            shots: 1000,
            l_max: 40,
            seed,
            exact: false,
            fit: FitSettings::default(),
            bootstrap: BootstrapSettings::default(),
            resolved_noise: None,
            oracle_fidelity: None,
            calibration: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(CsbError::Config(format!(
                "unsupported config schema '{}', expected '{CONFIG_SCHEMA}'",
                self.schema
            )));
        }
        if self.shots < 1 {
            return Err(CsbError::Config("shots must be at least 1".into()));
        }
        if self.l_max < 12 {
            return Err(CsbError::Config(
                "l_max must be at least 12 (minimum curve length for fitting)".into(),
            ));
        }
        if self.fit.amp_threshold < 0.0 {
            return Err(CsbError::Config("amp_threshold must be non-negative".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.fit.phase_threshold)
            || self.fit.phase_threshold == 0.0
        {
            return Err(CsbError::Config(
                "phase_threshold must lie in (0, pi]".into(),
            ));
        }
        let (lo, hi) = (self.bootstrap.lower_quantile, self.bootstrap.upper_quantile);
        if !(0.0 < lo && lo < 0.5 && 0.5 < hi && hi < 1.0) {
            return Err(CsbError::Config(
                "quantile levels must satisfy 0 < lower < 0.5 < upper < 1".into(),
            ));
        }
        if (lo + hi - 1.0).abs() > 1e-9 {
            return Err(CsbError::Config(
                "quantile levels must be symmetric about 0.5".into(),
            ));
        }
        if self.bootstrap.resamples < 100 {
            return Err(CsbError::Config("bootstrap needs at least 100 resamples".into()));
        }
        if let NoiseConfig::Calibrated(s) = &self.noise {
            parse_calibration_request(s)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| CsbError::Config(format!("cannot parse config: {e}")))
    }
}

/// One curve sample on disk: {"a", "b", "L", "p_hat", "shots"}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub a: usize,
    pub b: usize,
    #[serde(rename = "L")]
    pub l: u32,
    pub p_hat: f64,
    pub shots: u32,
}

/// Flatten curves into file records, ordered by pair then depth.
pub fn curves_to_records(curves: &[DecayCurve]) -> Vec<CurveRecord> {
    let mut out = Vec::new();
    for c in curves {
        for (&l, &p) in c.depths.iter().zip(c.p_hat.iter()) {
            out.push(CurveRecord {
                a: c.a,
                b: c.b,
                l,
                p_hat: p,
                shots: c.shots,
            });
        }
    }
    out
}

/// Group records back into curves, validating the schema: pairs with a ≤ b,
/// p̂ in [0, 1], consistent shot counts, and a contiguous depth grid starting
/// at 0 for every pair.
pub fn records_to_curves(records: &[CurveRecord]) -> Result<Vec<DecayCurve>> {
    if records.is_empty() {
        return Err(CsbError::Schema("curve file contains no records".into()));
    }
    let mut groups: BTreeMap<(usize, usize), Vec<&CurveRecord>> = BTreeMap::new();
    for r in records {
        if r.a > r.b {
            return Err(CsbError::Schema(format!(
                "pair ({}, {}) violates a <= b",
                r.a, r.b
            )));
        }
        if !(0.0..=1.0).contains(&r.p_hat) {
            return Err(CsbError::Schema(format!(
                "p_hat {} outside [0, 1] for pair ({}, {})",
                r.p_hat, r.a, r.b
            )));
        }
        if r.shots == 0 {
            return Err(CsbError::Schema("shots must be positive".into()));
        }
        groups.entry((r.a, r.b)).or_default().push(r);
    }
    let mut curves = Vec::with_capacity(groups.len());
    for ((a, b), mut rs) in groups {
        rs.sort_by_key(|r| r.l);
        let shots = rs[0].shots;
        let mut depths = Vec::with_capacity(rs.len());
        let mut p_hat = Vec::with_capacity(rs.len());
        for (i, r) in rs.iter().enumerate() {
            if r.l as usize != i {
                return Err(CsbError::Schema(format!(
                    "pair ({a}, {b}) depth grid is not contiguous from 0"
                )));
            }
            if r.shots != shots {
                return Err(CsbError::Schema(format!(
                    "pair ({a}, {b}) mixes shot counts"
                )));
            }
            depths.push(r.l);
            p_hat.push(r.p_hat);
        }
        curves.push(DecayCurve {
            a,
            b,
            depths,
            p_hat,
            shots,
            exact: false,
        });
    }
    Ok(curves)
}

pub fn curves_to_json(curves: &[DecayCurve]) -> Result<String> {
    Ok(serde_json::to_string(&curves_to_records(curves))?)
}

pub fn curves_from_json(s: &str) -> Result<Vec<DecayCurve>> {
    let records: Vec<CurveRecord> = serde_json::from_str(s)
        .map_err(|e| CsbError::Schema(format!("cannot parse curve file: {e}")))?;
    records_to_curves(&records)
}

//! On-disk fidelity report schema and its human-readable summary.

use serde::{Deserialize, Serialize};

use crate::estimation::Rejection;
use crate::fitting::FitModel;

pub const REPORT_SCHEMA: &str = "csb-report/1";

/// One filtered eigenvalue entry; complex numbers as [re, im].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEigenvalue {
    pub a: usize,
    pub b: usize,
    pub z: [f64; 2],
    pub f: [f64; 2],
    pub assigned_ideal: [f64; 2],
    pub lambda_e: [f64; 2],
    pub kept: bool,
    pub rejection: Rejection,
}

/// Comparison estimate from the 4-term matrix pencil baseline (no filtering).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub model: FitModel,
    pub degenerate_estimate: f64,
    pub estimate_count: usize,
    pub mean_rms_residual: f64,
}

/// Everything needed to audit how the estimates were produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub model: FitModel,
    pub amp_threshold: f64,
    pub phase_threshold: f64,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub weighted_fit: bool,
    pub restarts: u32,
    pub optimizer: String,
    pub subseed_scheme: String,
}

/// The complete output of one estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub schema: String,
    pub fei_low: f64,
    pub fei_high: f64,
    pub midpoint: f64,
    pub degenerate_estimate: f64,
    /// True when one subspace group was empty and the other stood in for it.
    pub degenerate_fallback: bool,
    pub resamples: usize,
    pub kept_count: usize,
    pub d_ts: usize,
    pub d_ns: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_fidelity: Option<f64>,
    pub eigenvalues: Vec<ReportEigenvalue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
    pub provenance: ReportProvenance,
}

impl FidelityReport {
    /// Stable plain-text summary (one datum per line, six decimals).
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "FEI = [{:.6}, {:.6}]\n",
            self.fei_low, self.fei_high
        ));
        out.push_str(&format!("midpoint = {:.6}\n", self.midpoint));
        out.push_str(&format!(
            "degenerate estimate = {:.6} (d_ts = {}, d_ns = {})\n",
            self.degenerate_estimate, self.d_ts, self.d_ns
        ));
        out.push_str(&format!(
            "kept eigenvalues = {} of {}\n",
            self.kept_count,
            self.eigenvalues.len()
        ));
        out.push_str(&format!(
            "amp threshold = {:.6}, phase threshold = {:.6}\n",
            self.provenance.amp_threshold, self.provenance.phase_threshold
        ));
        out.push_str(&format!(
            "bootstrap resamples = {}, seed = {}\n",
            self.resamples, self.seed
        ));
        if let Some(oracle) = self.oracle_fidelity {
            out.push_str(&format!("oracle fidelity = {oracle:.6}\n"));
        }
        if let Some(baseline) = &self.baseline {
            out.push_str(&format!(
                "baseline (matrix pencil) estimate = {:.6}\n",
                baseline.degenerate_estimate
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> FidelityReport {
        FidelityReport {
            schema: REPORT_SCHEMA.into(),
            fei_low: 1.0,
            fei_high: 1.0,
            midpoint: 1.0,
            degenerate_estimate: 1.0,
            degenerate_fallback: false,
            resamples: 2000,
            kept_count: 64,
            d_ts: 50,
            d_ns: 14,
            seed: 1,
            oracle_fidelity: None,
            eigenvalues: vec![],
            baseline: None,
            provenance: ReportProvenance {
                model: FitModel::SixTermOpt,
                amp_threshold: 0.01,
                phase_threshold: std::f64::consts::FRAC_PI_2,
                lower_quantile: 0.025,
                upper_quantile: 0.975,
                weighted_fit: false,
                restarts: 0,
                optimizer: "test".into(),
                subseed_scheme: "test".into(),
            },
        }
    }

    #[test]
    fn summary_formats_degenerate_interval() {
        let report = sample_report();
        let s = report.summary();
        assert!(s.contains("FEI = [1.000000, 1.000000]"));
        assert!(!s.contains("oracle fidelity"));
    }

    #[test]
    fn summary_includes_optional_lines_when_present() {
        let mut report = sample_report();
        report.oracle_fidelity = Some(0.893);
        report.baseline = Some(BaselineSummary {
            model: FitModel::FourTermMp,
            degenerate_estimate: 0.825,
            estimate_count: 144,
            mean_rms_residual: 0.04,
        });
        let s = report.summary();
        assert!(s.contains("oracle fidelity = 0.893000"));
        assert!(s.contains("baseline (matrix pencil) estimate = 0.825000"));
    }

    #[test]
    fn report_json_roundtrip_omits_empty_options() {
        let report = sample_report();
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("oracle_fidelity"));
        assert!(!json.contains("baseline"));
        let back: FidelityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kept_count, 64);
    }
}

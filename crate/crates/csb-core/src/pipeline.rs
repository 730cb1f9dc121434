//! End-to-end orchestration: resolve a config into gates and channels, run
//! the protocol, fit every curve, and assemble the fidelity report.

use rayon::prelude::*;

use crate::channel::{matrix_from_rows, process_fidelity, EigenbasisFrame, UnitaryGate};
use crate::config::{
    parse_calibration_request, CalibrationEcho, ExperimentConfig, NoiseConfig,
};
use crate::error::{CsbError, Result};
use crate::estimation::{
    build_report, unfiltered_degenerate_estimate, EstimationSettings, FeiResult,
};
use crate::fitting::{
    matrix_pencil_fit, six_term_fit_with, six_term_fit_with_restarts, ExponentialFit, FitModel,
    SixTermOptions,
};
use crate::gates;
use crate::noise::{calibrated_default_noise, compose, NoiseTriple};
use crate::protocol::{pair_subseed, run_protocol, DecayCurve, ProtocolSettings};
use crate::report::{BaselineSummary, FidelityReport, ReportProvenance};

/// Pencil order of the baseline weak-noise model.
pub const BASELINE_PENCIL_ORDER: usize = 4;

/// Resolve the config's gate spec: the built-in "toffoli" or a path to a
/// JSON matrix file.
pub fn resolve_gate(spec: &str) -> Result<UnitaryGate> {
    if spec.eq_ignore_ascii_case("toffoli") {
        return Ok(gates::toffoli());
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| CsbError::Config(format!("cannot read gate file '{spec}': {e}")))?;
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text)
        .map_err(|e| CsbError::Config(format!("cannot parse gate file '{spec}': {e}")))?;
    let matrix = matrix_from_rows(&rows)?;
    UnitaryGate::new(matrix)
}

/// Resolve the noise section into channel specs plus the exact-oracle
/// fidelity of the composed noisy gate.
pub fn resolve_noise(
    cfg: &ExperimentConfig,
    gate: &UnitaryGate,
) -> Result<(NoiseTriple, Option<CalibrationEcho>, f64)> {
    // A previously resolved triple (from a config echo) short-circuits
    // calibration so re-runs reproduce the original pipeline exactly.
    if let Some(triple) = &cfg.resolved_noise {
        let e0 = triple.gate.channel()?;
        if e0.dim() != gate.dim() {
            return Err(CsbError::DimensionMismatch {
                expected: gate.dim(),
                got: e0.dim(),
            });
        }
        let noisy = compose(&e0, &gate.channel())?;
        let oracle = process_fidelity(gate, &noisy)?;
        return Ok(((**triple).clone(), cfg.calibration.clone(), oracle));
    }
    match &cfg.noise {
        NoiseConfig::Calibrated(request) => {
            let (target, tolerance) = parse_calibration_request(request)?;
            let cal = calibrated_default_noise(gate, target, tolerance)?;
            let echo = CalibrationEcho {
                target,
                tolerance,
                gamma: cal.gamma,
                theta: cal.theta,
            };
            Ok((cal.triple, Some(echo), cal.oracle_fidelity))
        }
        NoiseConfig::Explicit(triple) => {
            let e0 = triple.gate.channel()?;
            if e0.dim() != gate.dim() {
                return Err(CsbError::DimensionMismatch {
                    expected: gate.dim(),
                    got: e0.dim(),
                });
            }
            let noisy = compose(&e0, &gate.channel())?;
            let oracle = process_fidelity(gate, &noisy)?;
            Ok(((**triple).clone(), None, oracle))
        }
    }
}

/// Simulation result: the sampled curves plus the fully resolved config echo
/// (sufficient to re-run the pipeline identically).
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub curves: Vec<DecayCurve>,
    pub config_echo: ExperimentConfig,
}

pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let gate = resolve_gate(&cfg.gate)?;
    let (triple, calibration, oracle) = resolve_noise(cfg, &gate)?;
    let settings = ProtocolSettings {
        l_max: cfg.l_max,
        shots: cfg.shots,
        seed: cfg.seed,
        exact: cfg.exact,
    };
    let curves = run_protocol(&gate, &triple, &settings)?;
    let mut echo = cfg.clone();
    echo.resolved_noise = Some(Box::new(triple));
    echo.oracle_fidelity = Some(oracle);
    echo.calibration = calibration;
    Ok(SimulationOutput { curves, config_echo: echo })
}

/// Processing result: the report plus the per-curve fits and bootstrap
/// samples backing the plot outputs.
#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub report: FidelityReport,
    pub fits: Vec<ExponentialFit>,
    pub baseline_fits: Option<Vec<ExponentialFit>>,
    pub fei: FeiResult,
}

fn optimizer_description(opts: &SixTermOptions) -> String {
    format!(
        "damped least squares, analytic Jacobian, |z| <= {}, gradient tol {:.0e}, max {} iterations",
        opts.z_bound, opts.gradient_tol, opts.max_iterations
    )
}

fn subseed_description() -> String {
    format!(
        "pair_seed = master_seed XOR (pair_index * {:#018x})",
        crate::protocol::SUBSEED_MULTIPLIER
    )
}

/// Fit every curve with the configured model and build the fidelity report;
/// `baseline` additionally runs the unfiltered matrix pencil comparison.
pub fn run_processing(
    curves: &[DecayCurve],
    cfg: &ExperimentConfig,
    baseline: bool,
) -> Result<ProcessOutput> {
    cfg.validate()?;
    if curves.is_empty() {
        return Err(CsbError::Schema("no curves to process".into()));
    }
    let gate = resolve_gate(&cfg.gate)?;
    let frame = EigenbasisFrame::new(&gate);
    for c in curves {
        if c.b >= gate.dim() {
            return Err(CsbError::Schema(format!(
                "curve pair ({}, {}) outside gate dimension {}; supply the matching gate definition",
                c.a,
                c.b,
                gate.dim()
            )));
        }
    }

    let opts = SixTermOptions {
        weighted: cfg.fit.weighted,
        ..SixTermOptions::default()
    };
    let fits: Vec<ExponentialFit> = curves
        .par_iter()
        .enumerate()
        .map(|(idx, curve)| {
            let ideal = frame.pair_eigenvalues(curve.a, curve.b);
            match cfg.fit.model {
                FitModel::SixTermOpt => {
                    if cfg.fit.restarts > 0 {
                        six_term_fit_with_restarts(
                            curve,
                            &ideal,
                            &opts,
                            cfg.fit.restarts,
                            pair_subseed(cfg.seed, idx).wrapping_add(1),
                        )
                    } else {
                        six_term_fit_with(curve, &ideal, None, &opts)
                    }
                }
                FitModel::FourTermMp => matrix_pencil_fit(curve, BASELINE_PENCIL_ORDER),
            }
        })
        .collect::<Result<_>>()?;

    let est = EstimationSettings {
        amp_threshold: cfg.fit.amp_threshold,
        phase_threshold: cfg.fit.phase_threshold,
        resamples: cfg.bootstrap.resamples,
        lower_quantile: cfg.bootstrap.lower_quantile,
        upper_quantile: cfg.bootstrap.upper_quantile,
        seed: cfg.seed,
    };
    let provenance = ReportProvenance {
        model: cfg.fit.model,
        amp_threshold: cfg.fit.amp_threshold,
        phase_threshold: cfg.fit.phase_threshold,
        lower_quantile: cfg.bootstrap.lower_quantile,
        upper_quantile: cfg.bootstrap.upper_quantile,
        weighted_fit: cfg.fit.weighted,
        restarts: cfg.fit.restarts,
        optimizer: optimizer_description(&opts),
        subseed_scheme: subseed_description(),
    };
    let (mut report, fei) = build_report(&fits, &frame, &est, cfg.oracle_fidelity, provenance)?;

    let baseline_fits = if baseline {
        let mp_fits: Vec<ExponentialFit> = curves
            .par_iter()
            .map(|curve| matrix_pencil_fit(curve, BASELINE_PENCIL_ORDER))
            .collect::<Result<_>>()?;
        let (estimate, count) = unfiltered_degenerate_estimate(&mp_fits, &frame)?;
        let mean_rms = mp_fits.iter().map(|f| f.rms_residual).sum::<f64>() / mp_fits.len() as f64;
        report.baseline = Some(BaselineSummary {
            model: FitModel::FourTermMp,
            degenerate_estimate: estimate,
            estimate_count: count,
            mean_rms_residual: mean_rms,
        });
        Some(mp_fits)
    } else {
        None
    };

    Ok(ProcessOutput {
        report,
        fits,
        baseline_fits,
        fei,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{curves_from_json, curves_to_json};
    use crate::noise::{NoiseFactor, NoiseTriple};

    fn quick_config(seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_toffoli(seed);
        cfg.shots = 200;
        cfg.l_max = 20;
        cfg.bootstrap.resamples = 400;
        cfg
    }

    #[test]
    fn simulate_then_process_end_to_end() {
        let cfg = quick_config(11);
        let sim = run_simulation(&cfg).unwrap();
        assert_eq!(sim.curves.len(), 36);
        assert_eq!(sim.curves[0].len(), 21);
        let oracle = sim.config_echo.oracle_fidelity.unwrap();
        assert!((0.885..=0.895).contains(&oracle));
        assert!(sim.config_echo.calibration.is_some());

        let out = run_processing(&sim.curves, &sim.config_echo, true).unwrap();
        assert_eq!(out.fits.len(), 36);
        assert!(out.report.fei_low <= out.report.midpoint);
        assert!(out.report.midpoint <= out.report.fei_high);
        assert_eq!(out.report.d_ts, 50);
        assert_eq!(out.report.d_ns, 14);
        assert!(out.report.baseline.is_some());
        assert_eq!(out.report.oracle_fidelity, Some(oracle));
    }

    #[test]
    fn zero_noise_exact_run_collapses_interval() {
        let mut cfg = quick_config(5);
        cfg.noise = NoiseConfig::Explicit(Box::new(NoiseTriple::identity(3)));
        cfg.exact = true;
        let sim = run_simulation(&cfg).unwrap();
        assert_eq!(sim.config_echo.oracle_fidelity, Some(1.0));
        let out = run_processing(&sim.curves, &sim.config_echo, false).unwrap();
        assert!((out.report.fei_low - 1.0).abs() < 1e-6);
        assert!((out.report.fei_high - 1.0).abs() < 1e-6);
        assert!((out.report.degenerate_estimate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn explicit_noise_oracle_is_computed() {
        let mut cfg = quick_config(8);
        cfg.noise = NoiseConfig::Explicit(Box::new(NoiseTriple::uniform(
            NoiseFactor::AmplitudeDamping { gamma: 0.02 },
            3,
        )));
        let sim = run_simulation(&cfg).unwrap();
        let oracle = sim.config_echo.oracle_fidelity.unwrap();
        assert!(oracle < 1.0 && oracle > 0.8);
    }

    #[test]
    fn processing_rejects_out_of_range_pairs() {
        let cfg = quick_config(2);
        let json = r#"[{"a": 0, "b": 9, "L": 0, "p_hat": 1.0, "shots": 10}]"#;
        let curves = curves_from_json(json).unwrap();
        let err = run_processing(&curves, &cfg, false).unwrap_err();
        assert!(matches!(err, CsbError::Schema(_)));
    }

    #[test]
    fn curve_file_roundtrip_preserves_processing() {
        let cfg = quick_config(21);
        let sim = run_simulation(&cfg).unwrap();
        let json = curves_to_json(&sim.curves).unwrap();
        let loaded = curves_from_json(&json).unwrap();
        let a = run_processing(&sim.curves, &sim.config_echo, false).unwrap();
        let b = run_processing(&loaded, &sim.config_echo, false).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
    }

    #[test]
    fn echo_closure_reproduces_report() {
        let cfg = quick_config(33);
        let sim = run_simulation(&cfg).unwrap();
        let first = run_processing(&sim.curves, &sim.config_echo, false).unwrap();
        // Re-run the whole pipeline from the echoed config alone.
        let echo_json = sim.config_echo.to_json().unwrap();
        let echo = ExperimentConfig::from_json(&echo_json).unwrap();
        let sim2 = run_simulation(&echo).unwrap();
        let second = run_processing(&sim2.curves, &sim2.config_echo, false).unwrap();
        assert_eq!(
            serde_json::to_string(&first.report).unwrap(),
            serde_json::to_string(&second.report).unwrap()
        );
    }

    #[test]
    fn four_term_model_is_selectable() {
        let mut cfg = quick_config(13);
        cfg.fit.model = FitModel::FourTermMp;
        let sim = run_simulation(&cfg).unwrap();
        let out = run_processing(&sim.curves, &sim.config_echo, false).unwrap();
        assert!(out.fits.iter().all(|f| f.model == FitModel::FourTermMp));
    }
}

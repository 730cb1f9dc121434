//! From fitted exponentials to fidelity statements.
//!
//! Fitted bases are matched to the ideal channel eigenvalues of their
//! preparation pair, filtered by amplitude and phase deviation, divided
//! through the ideal values to give noise eigenvalue estimates, and pooled
//! into a bootstrap fidelity estimate interval plus a degeneracy-weighted
//! point estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::channel::EigenbasisFrame;
use crate::error::{CsbError, Result};
use crate::fitting::{ExponentialFit, FitModel};
use crate::linalg::{cr, C64};
use crate::report::{FidelityReport, ReportEigenvalue, ReportProvenance, REPORT_SCHEMA};

/// Why a fitted term was dropped, if it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    None,
    SmallAmplitude,
    PhaseOutlier,
}

/// One fitted base matched against the ideal spectrum of its pair.
#[derive(Debug, Clone)]
pub struct FilteredEigenvalue {
    /// Fitted noisy channel eigenvalue.
    pub z: C64,
    /// Fitted amplitude.
    pub f: C64,
    /// Nearest ideal channel eigenvalue by circular phase distance.
    pub assigned_ideal: C64,
    /// Noise eigenvalue in the linear approximation, z / assigned_ideal.
    pub lambda_e: C64,
    pub a: usize,
    pub b: usize,
    pub kept: bool,
    pub rejection: Rejection,
}

/// Circular distance between two phases, in [0, π].
pub fn circular_phase_distance(x: f64, y: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = (x - y) % two_pi;
    if d > std::f64::consts::PI {
        d -= two_pi;
    }
    if d < -std::f64::consts::PI {
        d += two_pi;
    }
    d.abs()
}

/// Division by a unit-modulus ideal eigenvalue; ±1 divide exactly so the
/// reconstruction λ_E · λ_U = z is bit-exact for real ideal spectra.
fn divide_by_ideal(z: C64, ideal: C64) -> C64 {
    if (ideal - cr(1.0)).norm() < 1e-15 {
        z
    } else if (ideal + cr(1.0)).norm() < 1e-15 {
        -z
    } else {
        z / ideal
    }
}

fn distinct_ideals(ideal: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::new();
    for &v in ideal {
        if !out.iter().any(|u| (u - v).norm() < 1e-12) {
            out.push(v);
        }
    }
    out
}

/// Assign each fitted term to the nearest distinct ideal eigenvalue of its
/// pair, then apply the two rejection rules: small amplitude first, phase
/// deviation beyond `phase_threshold` second. Ties in the nearest-ideal
/// assignment break toward the ideal value of smaller phase magnitude, then
/// smaller signed phase.
pub fn filter_eigenvalues(
    fit: &ExponentialFit,
    ideal_pair_eigenvalues: &[C64],
    amp_threshold: f64,
    phase_threshold: f64,
) -> Result<Vec<FilteredEigenvalue>> {
    if fit.terms.is_empty() {
        return Err(CsbError::EmptyFit);
    }
    if amp_threshold < 0.0 || phase_threshold <= 0.0 {
        return Err(CsbError::InvalidParameter("thresholds must be positive".into()));
    }
    if phase_threshold > std::f64::consts::PI {
        return Err(CsbError::InvalidParameter(
            "phase threshold cannot exceed pi".into(),
        ));
    }
    let ideals = distinct_ideals(ideal_pair_eigenvalues);
    if ideals.is_empty() {
        return Err(CsbError::InvalidParameter(
            "pair has no ideal eigenvalues".into(),
        ));
    }

    let mut out = Vec::with_capacity(fit.terms.len());
    for term in &fit.terms {
        let phase = term.z.arg();
        let mut best = ideals[0];
        let mut best_dist = f64::INFINITY;
        for &cand in &ideals {
            let dist = circular_phase_distance(phase, cand.arg());
            let tie = (dist - best_dist).abs() <= 1e-12;
            let closer = dist < best_dist - 1e-12;
            let wins_tie = tie
                && (cand.arg().abs() < best.arg().abs() - 1e-12
                    || ((cand.arg().abs() - best.arg().abs()).abs() <= 1e-12
                        && cand.arg() < best.arg()));
            if closer || wins_tie {
                best = cand;
                best_dist = dist;
            }
        }
        let rejection = if term.f.norm() < amp_threshold {
            Rejection::SmallAmplitude
        } else if best_dist > phase_threshold {
            Rejection::PhaseOutlier
        } else {
            Rejection::None
        };
        out.push(FilteredEigenvalue {
            z: term.z,
            f: term.f,
            assigned_ideal: best,
            lambda_e: divide_by_ideal(term.z, best),
            a: fit.a,
            b: fit.b,
            kept: rejection == Rejection::None,
            rejection,
        });
    }
    Ok(out)
}

/// Real parts of the kept noise eigenvalues.
pub fn noise_eigenvalues(filtered: &[FilteredEigenvalue]) -> Result<Vec<f64>> {
    let kept: Vec<f64> = filtered
        .iter()
        .filter(|e| e.kept)
        .map(|e| e.lambda_e.re)
        .collect();
    if kept.is_empty() {
        return Err(CsbError::NoKeptEigenvalues);
    }
    Ok(kept)
}

/// Bootstrap fidelity estimate interval.
#[derive(Debug, Clone)]
pub struct FeiResult {
    pub low: f64,
    pub high: f64,
    pub midpoint: f64,
    /// The resampled fidelity estimates, in generation order.
    pub samples: Vec<f64>,
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Draw `resamples` bootstrap samples of size `d_squared` with replacement
/// from the pooled estimates, average each, and take nearest-rank quantiles
/// of the sorted means. Deterministic per seed.
pub fn fei(
    estimates: &[f64],
    d_squared: usize,
    resamples: usize,
    lower_quantile: f64,
    upper_quantile: f64,
    seed: u64,
) -> Result<FeiResult> {
    if estimates.is_empty() {
        return Err(CsbError::NoKeptEigenvalues);
    }
    if resamples < 100 {
        return Err(CsbError::InvalidParameter(
            "bootstrap needs at least 100 resamples".into(),
        ));
    }
    if d_squared == 0 {
        return Err(CsbError::InvalidParameter("d_squared must be positive".into()));
    }
    if !(0.0 < lower_quantile && lower_quantile < 0.5 && 0.5 < upper_quantile && upper_quantile < 1.0)
    {
        return Err(CsbError::InvalidParameter(
            "quantile levels must satisfy 0 < lower < 0.5 < upper < 1".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..d_squared {
            acc += estimates[rng.gen_range(0..estimates.len())];
        }
        samples.push(acc / d_squared as f64);
    }
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let low = nearest_rank(&sorted, lower_quantile);
    let high = nearest_rank(&sorted, upper_quantile);
    Ok(FeiResult {
        low,
        high,
        midpoint: 0.5 * (low + high),
        samples,
    })
}

/// Degeneracy-weighted point estimate (d_ts·⟨λ⟩_trivial + d_ns·⟨λ⟩_rest)/d².
/// When one group is empty the present group's mean stands in for both and
/// the returned flag is set.
pub fn degenerate_point_estimate(
    trivial: &[f64],
    nontrivial: &[f64],
    d_ts: usize,
    d_ns: usize,
) -> Result<(f64, bool)> {
    if trivial.is_empty() && nontrivial.is_empty() {
        return Err(CsbError::NoKeptEigenvalues);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let fallback = trivial.is_empty() || nontrivial.is_empty();
    let mean_t = if trivial.is_empty() {
        mean(nontrivial)
    } else {
        mean(trivial)
    };
    let mean_n = if nontrivial.is_empty() {
        mean(trivial)
    } else {
        mean(nontrivial)
    };
    let d2 = (d_ts + d_ns) as f64;
    Ok(((d_ts as f64 * mean_t + d_ns as f64 * mean_n) / d2, fallback))
}

/// Filtering and bootstrap settings for report construction.
#[derive(Debug, Clone)]
pub struct EstimationSettings {
    pub amp_threshold: f64,
    pub phase_threshold: f64,
    pub resamples: usize,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub seed: u64,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            amp_threshold: 0.01,
            phase_threshold: std::f64::consts::FRAC_PI_2,
            resamples: 2000,
            lower_quantile: 0.025,
            upper_quantile: 0.975,
            seed: 0,
        }
    }
}

/// Split kept estimates into trivial (λ_U = 1) and non-trivial groups.
pub fn split_by_subspace(filtered: &[FilteredEigenvalue]) -> (Vec<f64>, Vec<f64>) {
    let mut trivial = Vec::new();
    let mut nontrivial = Vec::new();
    for e in filtered.iter().filter(|e| e.kept) {
        if (e.assigned_ideal - cr(1.0)).norm() < 1e-9 {
            trivial.push(e.lambda_e.re);
        } else {
            nontrivial.push(e.lambda_e.re);
        }
    }
    (trivial, nontrivial)
}

/// Filter every fit against its pair's ideal eigenvalues, pool the kept noise
/// eigenvalues, and assemble the full fidelity report. Returns the report and
/// the bootstrap sample distribution (for histogram output).
pub fn build_report(
    fits: &[ExponentialFit],
    frame: &EigenbasisFrame,
    settings: &EstimationSettings,
    oracle_fidelity: Option<f64>,
    provenance: ReportProvenance,
) -> Result<(FidelityReport, FeiResult)> {
    if fits.is_empty() {
        return Err(CsbError::EmptyFit);
    }
    let d = frame.dim();
    let mut filtered = Vec::new();
    for fit in fits {
        if fit.a >= d || fit.b >= d {
            return Err(CsbError::Schema(format!(
                "pair ({}, {}) outside gate dimension {d}",
                fit.a, fit.b
            )));
        }
        let ideal = frame.pair_eigenvalues(fit.a, fit.b);
        filtered.extend(filter_eigenvalues(
            fit,
            &ideal,
            settings.amp_threshold,
            settings.phase_threshold,
        )?);
    }

    let pooled = noise_eigenvalues(&filtered)?;
    let d_ts = frame.trivial_multiplicity();
    let d_ns = d * d - d_ts;
    let fei_result = fei(
        &pooled,
        d * d,
        settings.resamples,
        settings.lower_quantile,
        settings.upper_quantile,
        settings.seed,
    )?;
    let (trivial, nontrivial) = split_by_subspace(&filtered);
    let (degenerate_estimate, degenerate_fallback) =
        degenerate_point_estimate(&trivial, &nontrivial, d_ts, d_ns)?;

    let eigenvalues: Vec<ReportEigenvalue> = filtered
        .iter()
        .map(|e| ReportEigenvalue {
            a: e.a,
            b: e.b,
            z: [e.z.re, e.z.im],
            f: [e.f.re, e.f.im],
            assigned_ideal: [e.assigned_ideal.re, e.assigned_ideal.im],
            lambda_e: [e.lambda_e.re, e.lambda_e.im],
            kept: e.kept,
            rejection: e.rejection,
        })
        .collect();

    let report = FidelityReport {
        schema: REPORT_SCHEMA.to_string(),
        fei_low: fei_result.low,
        fei_high: fei_result.high,
        midpoint: fei_result.midpoint,
        degenerate_estimate,
        degenerate_fallback,
        resamples: settings.resamples,
        kept_count: pooled.len(),
        d_ts,
        d_ns,
        seed: settings.seed,
        oracle_fidelity,
        eigenvalues,
        baseline: None,
        provenance,
    };
    Ok((report, fei_result))
}

/// Unfiltered estimate used by the baseline comparison: assign every term to
/// its nearest ideal eigenvalue (no amplitude or phase rejection) and apply
/// the degeneracy-weighted formula.
pub fn unfiltered_degenerate_estimate(
    fits: &[ExponentialFit],
    frame: &EigenbasisFrame,
) -> Result<(f64, usize)> {
    let mut filtered = Vec::new();
    for fit in fits {
        let ideal = frame.pair_eigenvalues(fit.a, fit.b);
        filtered.extend(filter_eigenvalues(
            fit,
            &ideal,
            0.0,
            std::f64::consts::PI,
        )?);
    }
    let count = filtered.iter().filter(|e| e.kept).count();
    let (trivial, nontrivial) = split_by_subspace(&filtered);
    let d_ts = frame.trivial_multiplicity();
    let d_ns = frame.dim_squared() - d_ts;
    let (estimate, _) = degenerate_point_estimate(&trivial, &nontrivial, d_ts, d_ns)?;
    Ok((estimate, count))
}

/// Always-set baseline fit model marker (kept next to the estimate in reports).
pub const BASELINE_MODEL: FitModel = FitModel::FourTermMp;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{ExponentialTerm, FitStatus};
    use crate::linalg::c;

    fn fit_of(terms: Vec<ExponentialTerm>) -> ExponentialFit {
        ExponentialFit {
            a: 0,
            b: 7,
            model: FitModel::SixTermOpt,
            terms,
            rms_residual: 0.0,
            status: FitStatus::Converged,
        }
    }

    #[test]
    fn filter_keeps_near_unit_phase() {
        let z = c(0.0, 0.01).exp() * 0.95;
        let fit = fit_of(vec![ExponentialTerm { z, f: cr(0.4) }]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].kept);
        assert!((out[0].assigned_ideal - cr(1.0)).norm() < 1e-15);
        assert!((out[0].lambda_e - z).norm() < 1e-15);
    }

    #[test]
    fn filter_rejects_phase_outlier() {
        let z = c(0.0, 0.8).exp() * 0.9;
        let fit = fit_of(vec![ExponentialTerm { z, f: cr(0.4) }]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let out = filter_eigenvalues(&fit, &ideal, 0.01, 0.5).unwrap();
        assert!(!out[0].kept);
        assert_eq!(out[0].rejection, Rejection::PhaseOutlier);
        // distance 0.8 to phase 0 beats distance 2.34 to phase π
        assert!((out[0].assigned_ideal - cr(1.0)).norm() < 1e-15);
    }

    #[test]
    fn filter_rejects_small_amplitude() {
        let fit = fit_of(vec![ExponentialTerm { z: cr(0.97), f: cr(1e-4) }]);
        let ideal = [cr(1.0); 4];
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(!out[0].kept);
        assert_eq!(out[0].rejection, Rejection::SmallAmplitude);
    }

    #[test]
    fn filter_is_idempotent_on_kept_set() {
        let z1 = c(0.0, 0.05).exp() * 0.93;
        let fit = fit_of(vec![
            ExponentialTerm { z: z1, f: cr(0.3) },
            ExponentialTerm { z: z1.conj(), f: cr(0.3) },
            ExponentialTerm { z: cr(-0.9), f: cr(0.25) },
        ]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let first =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        let kept_terms: Vec<ExponentialTerm> = first
            .iter()
            .filter(|e| e.kept)
            .map(|e| ExponentialTerm { z: e.z, f: e.f })
            .collect();
        let second = filter_eigenvalues(
            &fit_of(kept_terms.clone()),
            &ideal,
            0.01,
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        assert_eq!(second.len(), kept_terms.len());
        assert!(second.iter().all(|e| e.kept));
    }

    #[test]
    fn lambda_reconstruction_is_bit_exact_for_real_ideals() {
        let z = c(-0.913, 0.027);
        let fit = fit_of(vec![
            ExponentialTerm { z, f: cr(0.3) },
            ExponentialTerm { z: z.conj(), f: cr(0.3) },
        ]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        for e in &out {
            assert_eq!(e.lambda_e * e.assigned_ideal, e.z);
        }
    }

    #[test]
    fn noise_eigenvalue_examples() {
        let fit = fit_of(vec![ExponentialTerm { z: cr(-0.95), f: cr(0.5) }]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        let vals = noise_eigenvalues(&out).unwrap();
        assert!((vals[0] - 0.95).abs() < 1e-15);

        let z = c(0.0, 0.02).exp() * 0.9;
        let fit = fit_of(vec![
            ExponentialTerm { z, f: cr(0.5) },
            ExponentialTerm { z: z.conj(), f: cr(0.5) },
        ]);
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        let vals = noise_eigenvalues(&out).unwrap();
        for v in vals {
            assert!((v - 0.9 * 0.02f64.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_eigenvalues_of_identity_noise() {
        let fit = fit_of(vec![
            ExponentialTerm { z: cr(1.0), f: cr(0.5) },
            ExponentialTerm { z: cr(-1.0), f: cr(0.5) },
        ]);
        let ideal = [cr(1.0), cr(-1.0), cr(-1.0), cr(1.0)];
        let out =
            filter_eigenvalues(&fit, &ideal, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        let vals = noise_eigenvalues(&out).unwrap();
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn fei_degenerate_distribution() {
        let out = fei(&[0.9; 12], 4, 500, 0.025, 0.975, 3).unwrap();
        assert_eq!(out.low, 0.9);
        assert_eq!(out.high, 0.9);
        assert_eq!(out.midpoint, 0.9);
    }

    #[test]
    fn fei_matches_exhaustive_enumeration() {
        // Pool {1.0, 0.8} with d² = 4: resample means take values 1 − 0.05k
        // with binomial weights C(4, k); enumerate all 16 outcomes.
        let pool = [1.0, 0.8];
        let mut means = Vec::new();
        for mask in 0..16u32 {
            let k = mask.count_ones() as f64;
            means.push((4.0 - k) as f64 * 0.25 * 1.0 + k * 0.25 * 0.8 / 1.0);
        }
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let exact_low = nearest_rank(&means, 0.025);
        let exact_high = nearest_rank(&means, 0.975);
        let boot = fei(&pool, 4, 100_000, 0.025, 0.975, 11).unwrap();
        assert!(
            (boot.low - exact_low).abs() < 0.01,
            "low {} vs exact {}",
            boot.low,
            exact_low
        );
        assert!(
            (boot.high - exact_high).abs() < 0.01,
            "high {} vs exact {}",
            boot.high,
            exact_high
        );
    }

    #[test]
    fn fei_is_deterministic_and_ordered() {
        let pool: Vec<f64> = (0..64).map(|i| 0.85 + 0.001 * i as f64).collect();
        let a = fei(&pool, 64, 2000, 0.025, 0.975, 7).unwrap();
        let b = fei(&pool, 64, 2000, 0.025, 0.975, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.low <= a.midpoint && a.midpoint <= a.high);
        assert!((a.midpoint - 0.5 * (a.low + a.high)).abs() < 1e-15);
    }

    #[test]
    fn fei_stability_under_resample_widening() {
        // Synthetic paper-scale pool: 64 values spread around 0.89.
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let pool: Vec<f64> = (0..64)
            .map(|_| 0.89 + 0.03 * (rng.gen::<f64>() - 0.5))
            .collect();
        let small = fei(&pool, 64, 2000, 0.025, 0.975, 5).unwrap();
        let large = fei(&pool, 64, 20_000, 0.025, 0.975, 5).unwrap();
        assert!((small.low - large.low).abs() < 0.005);
        assert!((small.high - large.high).abs() < 0.005);
    }

    #[test]
    fn fei_rejects_bad_inputs() {
        assert!(fei(&[], 4, 1000, 0.025, 0.975, 0).is_err());
        assert!(fei(&[0.9], 4, 50, 0.025, 0.975, 0).is_err());
        assert!(fei(&[0.9], 4, 1000, 0.6, 0.975, 0).is_err());
    }

    #[test]
    fn degenerate_estimate_arithmetic() {
        let (v, fallback) =
            degenerate_point_estimate(&[0.9], &[0.85], 50, 14).unwrap();
        assert!((v - 0.8890625).abs() < 1e-12);
        assert!(!fallback);
    }

    #[test]
    fn degenerate_estimate_all_ones() {
        let (v, _) = degenerate_point_estimate(&[1.0, 1.0], &[1.0], 50, 14).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_estimate_single_group_fallback() {
        let (v, fallback) = degenerate_point_estimate(&[0.92, 0.9], &[], 50, 14).unwrap();
        assert!((v - 0.91).abs() < 1e-12);
        assert!(fallback);
    }

    #[test]
    fn degenerate_estimate_equals_plain_mean_when_groups_agree() {
        let (v, _) = degenerate_point_estimate(&[0.88, 0.9], &[0.89], 50, 14).unwrap();
        assert!((v - 0.89).abs() < 1e-12);
    }

    #[test]
    fn empty_fit_is_rejected() {
        let fit = fit_of(vec![]);
        assert!(matches!(
            filter_eigenvalues(&fit, &[cr(1.0)], 0.01, 1.0),
            Err(CsbError::EmptyFit)
        ));
    }
}

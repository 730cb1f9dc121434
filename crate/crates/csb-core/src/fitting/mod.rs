//! Damped complex-exponential fitting of decay curves.
//!
//! Two fitters share the [`ExponentialFit`] output type: the matrix pencil
//! method on a 4-term model (the subspace baseline) and a nonlinear
//! least-squares fit of a 6-term model that also captures off-diagonal noise
//! contributions. Fitted term sets are always closed under complex
//! conjugation so the model stays real on real data.

mod optim;
mod pencil;

pub use optim::{six_term_fit, six_term_fit_with, six_term_fit_with_restarts, SixTermOptions};
pub use pencil::matrix_pencil_fit;

use serde::{Deserialize, Serialize};

use crate::error::{CsbError, Result};
use crate::linalg::{c, cr, C64};
use crate::protocol::DecayCurve;

/// Which model produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    FourTermMp,
    SixTermOpt,
}

/// Fit health flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// Optimizer hit the iteration cap; best iterate returned.
    MaxIterations,
    /// Curve was constant; single-term fallback returned.
    Degenerate,
    /// Data rank collapsed below the requested order; fewer terms returned.
    ReducedRank,
}

/// One fitted exponential term f · z^L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialTerm {
    pub z: C64,
    pub f: C64,
}

/// Fitted exponential decomposition of one decay curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    pub a: usize,
    pub b: usize,
    pub model: FitModel,
    pub terms: Vec<ExponentialTerm>,
    pub rms_residual: f64,
    pub status: FitStatus,
}

/// Tolerance for the conjugate-closure invariant.
pub const CONJUGATE_TOL: f64 = 1e-8;
/// |Im z| at or below this is treated as a real (self-conjugate) base.
pub(crate) const REALITY_TOL: f64 = 1e-9;

/// Whether the term multiset is invariant under (z, f) → (z*, f*) within tol.
pub fn is_conjugate_closed(terms: &[ExponentialTerm], tol: f64) -> bool {
    let mut used = vec![false; terms.len()];
    for i in 0..terms.len() {
        if used[i] {
            continue;
        }
        let target_z = terms[i].z.conj();
        let target_f = terms[i].f.conj();
        let partner = (i..terms.len()).find(|&j| {
            !used[j]
                && (terms[j].z - target_z).norm() <= tol * (1.0 + terms[i].z.norm())
                && (terms[j].f - target_f).norm() <= tol * (1.0 + terms[i].f.norm())
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

pub(crate) fn eval_terms(terms: &[ExponentialTerm], l: u32) -> C64 {
    terms
        .iter()
        .map(|t| t.f * t.z.powu(l))
        .fold(c(0.0, 0.0), |acc, x| acc + x)
}

/// Evaluate Σ f_i z_i^L for a conjugate-closed term set; the imaginary part
/// must cancel below 1e-9 and the real part is returned.
pub fn model_eval(terms: &[ExponentialTerm], l: u32) -> Result<f64> {
    if !is_conjugate_closed(terms, CONJUGATE_TOL) {
        return Err(CsbError::InvalidParameter(
            "terms are not closed under complex conjugation".into(),
        ));
    }
    let v = eval_terms(terms, l);
    if v.im.abs() > 1e-9 {
        return Err(CsbError::Numerical(format!(
            "model value has imaginary residue {:.3e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Root-mean-square deviation of the term model from the curve samples.
pub fn rms_residual(terms: &[ExponentialTerm], p_hat: &[f64]) -> f64 {
    if p_hat.is_empty() {
        return 0.0;
    }
    let ss: f64 = p_hat
        .iter()
        .enumerate()
        .map(|(l, &y)| {
            let m = eval_terms(terms, l as u32).re;
            (m - y) * (m - y)
        })
        .sum();
    (ss / p_hat.len() as f64).sqrt()
}

/// Internal optimizer parametrization: one representative per conjugate pair,
/// contributing 2·Re(f·z^L) to the model.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairParam {
    pub z: C64,
    pub f: C64,
}

impl PairParam {
    pub(crate) fn contribution(&self, zl: C64) -> f64 {
        2.0 * (self.f * zl).re
    }
}

/// Expand pair representatives into the conjugate-closed term set. A
/// representative on the real axis becomes a single real term with its
/// amplitude folded to 2·Re(f).
pub(crate) fn pairs_to_terms(pairs: &[PairParam]) -> Vec<ExponentialTerm> {
    let mut terms = Vec::new();
    for p in pairs {
        if p.z.im.abs() <= REALITY_TOL {
            terms.push(ExponentialTerm {
                z: cr(p.z.re),
                f: cr(2.0 * p.f.re),
            });
        } else {
            let (z, f) = if p.z.im >= 0.0 {
                (p.z, p.f)
            } else {
                (p.z.conj(), p.f.conj())
            };
            terms.push(ExponentialTerm { z, f });
            terms.push(ExponentialTerm {
                z: z.conj(),
                f: f.conj(),
            });
        }
    }
    terms
}

/// Collapse a conjugate-closed term set back into pair representatives.
pub(crate) fn terms_to_pairs(terms: &[ExponentialTerm]) -> Result<Vec<PairParam>> {
    let mut used = vec![false; terms.len()];
    let mut pairs = Vec::new();
    for i in 0..terms.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let t = terms[i];
        if t.z.im.abs() <= CONJUGATE_TOL {
            pairs.push(PairParam {
                z: cr(t.z.re),
                f: cr(0.5 * t.f.re),
            });
            continue;
        }
        let partner = (i + 1..terms.len()).find(|&j| {
            !used[j]
                && (terms[j].z - t.z.conj()).norm() <= CONJUGATE_TOL * (1.0 + t.z.norm())
        });
        let j = partner.ok_or_else(|| {
            CsbError::InvalidParameter("terms are not closed under complex conjugation".into())
        })?;
        used[j] = true;
        let z = (t.z + terms[j].z.conj()).scale(0.5);
        let f = (t.f + terms[j].f.conj()).scale(0.5);
        let (z, f) = if z.im >= 0.0 { (z, f) } else { (z.conj(), f.conj()) };
        pairs.push(PairParam { z, f });
    }
    Ok(pairs)
}

/// Geometric decay scale of the curve envelope: log-linear regression on the
/// windowed maximum of |P̂|, the crude |z| guess used for initialization.
pub(crate) fn envelope_decay_estimate(p_hat: &[f64]) -> f64 {
    let n = p_hat.len();
    let mut points = Vec::new();
    for l in 0..n {
        let lo = l.saturating_sub(1);
        let hi = (l + 1).min(n - 1);
        let env = p_hat[lo..=hi].iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        if env > 1e-3 {
            points.push((l as f64, env.ln()));
        }
    }
    if points.len() < 2 {
        return 0.9;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return 0.9;
    }
    let slope = (n * sxy - sx * sy) / denom;
    slope.exp().clamp(0.5, 1.0)
}

/// Deduplicated upper-half-plane representatives of the ideal pair
/// eigenvalues, in first-seen order.
fn ideal_representatives(ideal: &[C64]) -> Vec<C64> {
    let mut reps: Vec<C64> = Vec::new();
    for &v in ideal {
        let canon = if v.im < 0.0 { v.conj() } else { v };
        if !reps.iter().any(|r| (r - canon).norm() < 1e-9) {
            reps.push(canon);
        }
    }
    reps
}

/// Most frequent ideal eigenvalue; ties break toward the smaller phase
/// magnitude, then the smaller signed phase.
fn dominant_ideal(ideal: &[C64]) -> C64 {
    let reps = ideal_representatives(ideal);
    let mut best = reps[0];
    let mut best_count = 0usize;
    for &r in &reps {
        let count = ideal
            .iter()
            .filter(|v| {
                let canon = if v.im < 0.0 { v.conj() } else { **v };
                (canon - r).norm() < 1e-9
            })
            .count();
        let better = count > best_count
            || (count == best_count
                && (r.arg().abs() < best.arg().abs() - 1e-12
                    || ((r.arg().abs() - best.arg().abs()).abs() <= 1e-12
                        && r.arg() < best.arg())));
        if better {
            best = r;
            best_count = count;
        }
    }
    best
}

/// Starting terms for the 6-term fit: the deduplicated ideal pair eigenvalues
/// scaled by the envelope decay estimate, padded to three conjugate-pair
/// representatives near the dominant ideal phase, with amplitudes from linear
/// least squares at fixed bases.
pub fn initialize_from_ideal(ideal: &[C64], curve: &DecayCurve) -> Vec<ExponentialTerm> {
    let scale = envelope_decay_estimate(&curve.p_hat);
    let reps = ideal_representatives(ideal);
    let dom = dominant_ideal(ideal);

    let mut zs: Vec<C64> = reps.iter().map(|r| r.scale(scale)).collect();
    // The first pad sits on the unit circle at the dominant phase: the step
    // channel is trace preserving, so a stationary |z| = 1 mode is always
    // present. Later pads start slightly inside and rotated. Deterministic
    // nudges keep padded bases from duplicating existing ones, which would
    // start the optimizer on a rank-deficient Jacobian.
    let mut pad = 0u32;
    while zs.len() < 3 {
        let base = if pad == 0 {
            dom
        } else {
            dom.scale(scale) * c(0.0, 0.15 * f64::from(pad)).exp() * 0.97f64.powi(pad as i32)
        };
        let mut cand = base;
        let mut nudges = 0;
        while zs.iter().any(|z| (z - cand).norm() < 1e-6) && nudges < 8 {
            cand *= c(0.0, 0.1).exp();
            nudges += 1;
        }
        zs.push(cand);
        pad += 1;
    }

    let pairs = amplitudes_at_fixed_bases(&zs, &curve.p_hat);
    pairs_to_terms(&pairs)
}

/// Real least squares for pair amplitudes with the bases held fixed.
pub(crate) fn amplitudes_at_fixed_bases(zs: &[C64], p_hat: &[f64]) -> Vec<PairParam> {
    use nalgebra::{DMatrix, DVector};
    let n = p_hat.len();
    let k = zs.len();
    let mut a = DMatrix::<f64>::zeros(n, 2 * k);
    for (j, &z) in zs.iter().enumerate() {
        let mut zl = cr(1.0);
        for l in 0..n {
            a[(l, 2 * j)] = 2.0 * zl.re;
            a[(l, 2 * j + 1)] = -2.0 * zl.im;
            zl *= z;
        }
    }
    let y = DVector::from_column_slice(p_hat);
    let svd = a.svd(true, true);
    let eps = svd.singular_values.iter().cloned().fold(0.0, f64::max) * 1e-12;
    let x = svd
        .solve(&y, eps.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(2 * k));
    zs.iter()
        .enumerate()
        .map(|(j, &z)| PairParam {
            z,
            f: c(x[2 * j], x[2 * j + 1]),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use crate::protocol::enumerate_preparations;

    fn curve_from(p: Vec<f64>, a: usize, b: usize) -> DecayCurve {
        DecayCurve {
            a,
            b,
            depths: (0..p.len() as u32).collect(),
            p_hat: p,
            shots: 1000,
            exact: false,
        }
    }

    #[test]
    fn model_eval_constant_term() {
        let terms = [ExponentialTerm { z: cr(1.0), f: cr(1.0) }];
        for l in 0..10 {
            assert!((model_eval(&terms, l).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn model_eval_conjugate_pair() {
        // 2·0.5·0.81·cos(πL/4) vanishes at L = 2.
        let z = c(0.0, std::f64::consts::FRAC_PI_4).exp() * 0.9;
        let terms = [
            ExponentialTerm { z, f: cr(0.5) },
            ExponentialTerm { z: z.conj(), f: cr(0.5) },
        ];
        assert!(model_eval(&terms, 2).unwrap().abs() < 1e-12);
        let expect_l1 = 0.9 * std::f64::consts::FRAC_PI_4.cos();
        assert!((model_eval(&terms, 1).unwrap() - expect_l1).abs() < 1e-12);
    }

    #[test]
    fn model_eval_negative_real_base_alternates() {
        let terms = [ExponentialTerm { z: cr(-0.95), f: cr(1.0) }];
        let v: Vec<f64> = (0..4).map(|l| model_eval(&terms, l).unwrap()).collect();
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] + 0.95).abs() < 1e-15);
        assert!((v[2] - 0.9025).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[0].abs() > w[1].abs()));
    }

    #[test]
    fn model_eval_rejects_unpaired_terms() {
        let terms = [ExponentialTerm { z: c(0.9, 0.1), f: cr(1.0) }];
        assert!(model_eval(&terms, 1).is_err());
    }

    #[test]
    fn pairs_terms_roundtrip() {
        let pairs = [
            PairParam { z: c(0.9, 0.3), f: c(0.2, -0.1) },
            PairParam { z: cr(0.95), f: cr(0.4) },
        ];
        let terms = pairs_to_terms(&pairs);
        assert_eq!(terms.len(), 3);
        assert!(is_conjugate_closed(&terms, 1e-12));
        let back = terms_to_pairs(&terms).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].z - pairs[0].z).norm() < 1e-12);
        assert!((back[0].f - pairs[0].f).norm() < 1e-12);
        assert!((back[1].z - pairs[1].z).norm() < 1e-12);
        assert!((back[1].f - pairs[1].f).norm() < 1e-12);
    }

    #[test]
    fn envelope_estimate_for_pure_decay() {
        let p: Vec<f64> = (0..41).map(|l| 0.9f64.powi(l)).collect();
        let s = envelope_decay_estimate(&p);
        assert!((s - 0.9).abs() < 0.02, "estimate {s}");
    }

    #[test]
    fn envelope_estimate_for_alternating_decay() {
        let p: Vec<f64> = (0..41)
            .map(|l| 0.95f64.powi(l) * if l % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        let s = envelope_decay_estimate(&p);
        assert!((s - 0.95).abs() < 0.03, "estimate {s}");
    }

    #[test]
    fn initialization_for_constant_curve() {
        let curve = curve_from(vec![1.0; 41], 0, 0);
        let ideal = [cr(1.0); 4];
        let terms = initialize_from_ideal(&ideal, &curve);
        assert!(is_conjugate_closed(&terms, 1e-9));
        let main = terms
            .iter()
            .find(|t| (t.z - cr(1.0)).norm() < 1e-9)
            .expect("unit base present");
        assert!((main.f - cr(1.0)).norm() < 1e-6, "f = {}", main.f);
    }

    #[test]
    fn initialization_for_mixed_toffoli_pair() {
        let gate = gates::toffoli();
        let pairs = enumerate_preparations(&gate);
        let pair = pairs.iter().find(|p| p.a == 4 && p.b == 7).unwrap();
        let p: Vec<f64> = (0..41)
            .map(|l| 0.97f64.powi(l) * if l % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        let curve = curve_from(p, 4, 7);
        let terms = initialize_from_ideal(&pair.ideal_eigenvalues, &curve);
        let has_plus = terms.iter().any(|t| t.z.re > 0.5 && t.z.im.abs() < 0.3);
        let has_minus = terms.iter().any(|t| t.z.re < -0.5 && t.z.im.abs() < 0.3);
        assert!(has_plus && has_minus, "phases 0 and π must both be present");
    }

    #[test]
    fn closure_detects_asymmetry() {
        let good = [
            ExponentialTerm { z: c(0.9, 0.2), f: c(0.5, 0.1) },
            ExponentialTerm { z: c(0.9, -0.2), f: c(0.5, -0.1) },
        ];
        assert!(is_conjugate_closed(&good, 1e-10));
        let bad = [
            ExponentialTerm { z: c(0.9, 0.2), f: c(0.5, 0.1) },
            ExponentialTerm { z: c(0.9, -0.2), f: c(0.5, 0.1) },
        ];
        assert!(!is_conjugate_closed(&bad, 1e-10));
    }
}

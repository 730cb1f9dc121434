//! Matrix pencil extraction of exponential bases from uniform samples.
//!
//! Builds a Hankel data matrix with pencil parameter ⌊len/2⌋, truncates its
//! SVD to the requested model order, solves the shifted subspace pencil for
//! the bases and a linear least-squares problem for the amplitudes.

use super::{
    is_conjugate_closed, rms_residual, ExponentialFit, ExponentialTerm, FitModel, FitStatus,
    CONJUGATE_TOL,
};
use crate::error::{CsbError, Result};
use crate::linalg::{cr, lstsq, small_eigenvalues, CMat, CVec, C64};
use crate::protocol::DecayCurve;

/// Relative singular-value cutoff below which the data rank has collapsed.
const RANK_TOL: f64 = 1e-10;

/// Fit up to `order` exponential terms to a uniformly sampled curve.
///
/// Exact (to ~1e-8) on noiseless data containing at most `order` distinct
/// bases; when the data rank is lower than `order` the fit collapses to the
/// actual rank and is flagged [`FitStatus::ReducedRank`].
pub fn matrix_pencil_fit(curve: &DecayCurve, order: usize) -> Result<ExponentialFit> {
    let n = curve.len();
    if order == 0 {
        return Err(CsbError::InvalidParameter("pencil order must be positive".into()));
    }
    if n < 2 * order {
        return Err(CsbError::CurveTooShort { len: n, min: 2 * order });
    }
    if !curve.has_uniform_grid() {
        return Err(CsbError::NonUniformGrid);
    }

    let pencil = n / 2;
    let rows = n - pencil;
    let cols = pencil + 1;
    let hankel = CMat::from_fn(rows, cols, |r, c_| cr(curve.p_hat[r + c_]));

    let svd = hankel.svd(true, true);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if s_max < 1e-300 {
        return Err(CsbError::EmptyFit);
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > s_max * RANK_TOL)
        .count();
    let m = order.min(rank).min(pencil);

    // Signal subspace: first m right singular vectors.
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| CsbError::Numerical("SVD did not return right vectors".into()))?;
    let v = v_t.rows(0, m).adjoint(); // (pencil + 1) × m
    let v1 = v.rows(0, pencil).into_owned();
    let v2 = v.rows(1, pencil).into_owned();

    // Eigenvalues of pinv(V1)·V2 are the conjugated bases.
    let v1_svd = v1.svd(true, true);
    let eps = v1_svd.singular_values.iter().cloned().fold(0.0, f64::max) * 1e-13;
    let pencil_matrix = v1_svd
        .solve(&v2, eps.max(f64::MIN_POSITIVE))
        .map_err(|e| CsbError::Numerical(format!("pencil solve failed: {e}")))?;
    let bases: Vec<C64> = small_eigenvalues(&pencil_matrix)?
        .into_iter()
        .map(|z| z.conj())
        .collect();

    // Amplitudes from linear least squares on the Vandermonde system.
    let mut design = CMat::zeros(n, bases.len());
    for (j, &z) in bases.iter().enumerate() {
        let mut zl = cr(1.0);
        for l in 0..n {
            design[(l, j)] = zl;
            zl *= z;
        }
    }
    let y = CVec::from_iterator(n, curve.p_hat.iter().map(|&p| cr(p)));
    let amps = lstsq(&design, &y)?;

    let raw: Vec<(C64, C64)> = bases.into_iter().zip(amps.iter().cloned()).collect();
    let terms = symmetrize(&raw);
    debug_assert!(is_conjugate_closed(&terms, CONJUGATE_TOL));

    Ok(ExponentialFit {
        a: curve.a,
        b: curve.b,
        model: FitModel::FourTermMp,
        terms: terms.clone(),
        rms_residual: rms_residual(&terms, &curve.p_hat),
        status: if m < order {
            FitStatus::ReducedRank
        } else {
            FitStatus::Converged
        },
    })
}

/// Force conjugate closure on a raw (base, amplitude) set. Real curves give
/// near-conjugate pairs already; this averages residual asymmetry away and
/// realifies lone near-real bases.
fn symmetrize(raw: &[(C64, C64)]) -> Vec<ExponentialTerm> {
    const PAIR_TOL: f64 = 1e-6;
    let mut used = vec![false; raw.len()];
    let mut terms = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let (zi, fi) = raw[i];
        if zi.im.abs() <= PAIR_TOL * (1.0 + zi.norm()) {
            terms.push(ExponentialTerm { z: cr(zi.re), f: cr(fi.re) });
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &(zj, _)) in raw.iter().enumerate().skip(i + 1) {
            if used[j] {
                continue;
            }
            let dist = (zj - zi.conj()).norm();
            if dist <= PAIR_TOL * (1.0 + zi.norm()) && best.map_or(true, |(_, d)| dist < d) {
                best = Some((j, dist));
            }
        }
        match best {
            Some((j, _)) => {
                used[j] = true;
                let (zj, fj) = raw[j];
                let z = (zi + zj.conj()).scale(0.5);
                let f = (fi + fj.conj()).scale(0.5);
                let (z, f) = if z.im >= 0.0 { (z, f) } else { (z.conj(), f.conj()) };
                terms.push(ExponentialTerm { z, f });
                terms.push(ExponentialTerm { z: z.conj(), f: f.conj() });
            }
            None => {
                // Lone complex base: split its amplitude across the pair so
                // the model stays real.
                let half = fi.scale(0.5);
                terms.push(ExponentialTerm { z: zi, f: half });
                terms.push(ExponentialTerm { z: zi.conj(), f: half.conj() });
            }
        }
    }
    terms
}

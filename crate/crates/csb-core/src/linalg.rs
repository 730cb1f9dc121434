//! Dense complex linear algebra used throughout the crate.
//!
//! Thin wrappers over `nalgebra` plus the unitary eigendecomposition used to
//! build benchmarking frames. Matrices are small (at most d² × d² with d ≤ a
//! few dozen), so everything is dense and double precision.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;

use crate::error::{CsbError, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Shorthand complex constructor.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Real number as a complex scalar.
#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Element-wise complex conjugate (no transpose).
pub fn conj(m: &CMat) -> CMat {
    m.map(|x| x.conj())
}

/// Largest absolute entry difference between two equally sized matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry of a complex vector.
pub fn max_abs(v: &CVec) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(&(m * m.adjoint()), &identity(m.nrows())) <= tol
}

pub(crate) fn ensure_square(m: &CMat) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(CsbError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; 1 - u keeps the log argument strictly positive.
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre sample,
/// with the R diagonal phases absorbed into Q.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| c(standard_normal(rng), standard_normal(rng)));
    let qr = g.qr();
    let r = qr.r();
    let phases: Vec<C64> = (0..d)
        .map(|i| {
            let x = r[(i, i)];
            if x.norm() < 1e-300 {
                cr(1.0)
            } else {
                x / x.norm()
            }
        })
        .collect();
    qr.q() * CMat::from_diagonal(&CVec::from_vec(phases))
}

/// Minimum-norm least squares solution of `a x = rhs` via SVD.
pub fn lstsq(a: &CMat, rhs: &CVec) -> Result<CVec> {
    let svd = a.clone().svd(true, true);
    let eps = svd.singular_values.iter().cloned().fold(0.0, f64::max) * 1e-13;
    svd.solve(rhs, eps.max(f64::MIN_POSITIVE))
        .map(|m| CVec::from_column_slice(m.as_slice()))
        .map_err(|e| CsbError::Numerical(format!("least squares solve failed: {e}")))
}

/// Eigenvalues of a small dense complex matrix via its Schur form.
pub fn small_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let d = ensure_square(m)?;
    if d == 0 {
        return Ok(Vec::new());
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 100_000)
        .ok_or_else(|| CsbError::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut eig: Vec<C64> = (0..d).map(|i| t[(i, i)]).collect();
    eig.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eig)
}

/// Eigendecomposition U = A diag(Λ) A† of a unitary matrix with an
/// orthonormal A and unit-modulus Λ.
///
/// Reduces to two commuting Hermitian problems, (U + U†)/2 and (U − U†)/(2i),
/// refining degenerate eigenspaces of the first with the second so that the
/// result is a joint eigenbasis even for highly degenerate spectra.
pub fn unitary_eigensystem(u: &CMat) -> Result<(CMat, Vec<C64>)> {
    let d = ensure_square(u)?;
    if !is_unitary(u, 1e-10) {
        return Err(CsbError::InvalidGate("matrix is not unitary".into()));
    }
    let h_cos = (u + u.adjoint()).scale(0.5);
    let h_sin = (u - u.adjoint()) * c(0.0, -0.5);

    let eig = SymmetricEigen::new(h_cos);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut vectors = CMat::zeros(d, d);
    let mut cos_values = vec![0.0; d];
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        cos_values[dst] = eig.eigenvalues[src];
    }

    // Split each (nearly) degenerate group of the cosine part with the sine part.
    const GROUP_TOL: f64 = 1e-7;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (cos_values[end] - cos_values[end - 1]).abs() <= GROUP_TOL {
            end += 1;
        }
        let len = end - start;
        if len > 1 {
            let vg = vectors.columns(start, len).into_owned();
            let sub = vg.adjoint() * &h_sin * &vg;
            let sub_eig = SymmetricEigen::new(sub);
            let mut sub_order: Vec<usize> = (0..len).collect();
            sub_order.sort_by(|&i, &j| {
                sub_eig.eigenvalues[i]
                    .partial_cmp(&sub_eig.eigenvalues[j])
                    .unwrap()
            });
            let mut w = CMat::zeros(len, len);
            for (dst, &src) in sub_order.iter().enumerate() {
                w.set_column(dst, &sub_eig.eigenvectors.column(src));
            }
            let rotated = vg * w;
            for k in 0..len {
                vectors.set_column(start + k, &rotated.column(k));
            }
        }
        start = end;
    }

    // Eigenphases from Rayleigh quotients, normalized onto the unit circle.
    let mut phases = Vec::with_capacity(d);
    for k in 0..d {
        let v = vectors.column(k).into_owned();
        let lambda = (v.adjoint() * u * &v)[(0, 0)];
        let n = lambda.norm();
        if n < 0.5 {
            return Err(CsbError::Numerical(
                "eigenphase lost modulus during refinement".into(),
            ));
        }
        phases.push(lambda / n);
    }

    // Deterministic column order: ascending phase angle.
    let mut final_order: Vec<usize> = (0..d).collect();
    final_order.sort_by(|&i, &j| phases[i].arg().partial_cmp(&phases[j].arg()).unwrap());
    let mut a = CMat::zeros(d, d);
    let mut lambda = Vec::with_capacity(d);
    for (dst, &src) in final_order.iter().enumerate() {
        a.set_column(dst, &vectors.column(src));
        lambda.push(phases[src]);
    }

    let rec = &a * CMat::from_diagonal(&CVec::from_vec(lambda.clone())) * a.adjoint();
    if max_abs_diff(&rec, u) > 1e-10 {
        return Err(CsbError::Numerical(
            "unitary eigendecomposition residual exceeds tolerance".into(),
        ));
    }
    Ok((a, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn kron_of_diagonals() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cr(1.0), cr(-1.0)]));
        let k = kron(&a, &a);
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (i, &e) in expect.iter().enumerate() {
            assert!((k[(i, i)] - cr(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &d in &[2usize, 4, 8] {
            let u = random_unitary(d, &mut rng);
            assert!(is_unitary(&u, 1e-12), "d = {d}");
        }
    }

    #[test]
    fn eigensystem_reconstructs_random_unitaries() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for &d in &[2usize, 4, 8] {
            for _ in 0..10 {
                let u = random_unitary(d, &mut rng);
                let (a, lambda) = unitary_eigensystem(&u).unwrap();
                assert!(is_unitary(&a, 1e-10));
                for l in &lambda {
                    assert!((l.norm() - 1.0).abs() < 1e-10);
                }
                let rec = &a * CMat::from_diagonal(&CVec::from_vec(lambda)) * a.adjoint();
                assert!(max_abs_diff(&rec, &u) < 1e-10);
            }
        }
    }

    #[test]
    fn eigensystem_handles_degenerate_spectrum() {
        // diag(1, 1, -1, i) has a two-fold degenerate eigenvalue; the basis
        // must stay orthonormal and reconstruct exactly.
        let u = CMat::from_diagonal(&CVec::from_vec(vec![
            cr(1.0),
            cr(1.0),
            cr(-1.0),
            c(0.0, 1.0),
        ]));
        let (a, lambda) = unitary_eigensystem(&u).unwrap();
        assert!(is_unitary(&a, 1e-12));
        let rec = &a * CMat::from_diagonal(&CVec::from_vec(lambda)) * a.adjoint();
        assert!(max_abs_diff(&rec, &u) < 1e-12);
    }

    #[test]
    fn eigensystem_splits_conjugate_phases() {
        // Rotation by ±θ shares the cosine; the sine part must separate them.
        let th = 0.3f64;
        let u = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => cr(th.cos()),
            (0, 1) => cr(-th.sin()),
            (1, 0) => cr(th.sin()),
            (1, 1) => cr(th.cos()),
            _ => unreachable!(),
        });
        let (_, lambda) = unitary_eigensystem(&u).unwrap();
        assert!((lambda[0] - c(th.cos(), -th.sin())).norm() < 1e-12);
        assert!((lambda[1] - c(th.cos(), th.sin())).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = CMat::from_fn(2, 2, |i, j| cr((i + j) as f64));
        assert!(unitary_eigensystem(&m).is_err());
    }

    #[test]
    fn lstsq_solves_exact_system() {
        let a = CMat::from_fn(4, 2, |i, j| c((i * (j + 1)) as f64, j as f64));
        let x = CVec::from_vec(vec![c(1.0, -0.5), c(0.25, 2.0)]);
        let rhs = &a * &x;
        let sol = lstsq(&a, &rhs).unwrap();
        assert!((sol - x).norm() < 1e-10);
    }

    #[test]
    fn small_eigenvalues_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5, 0.1), c(-0.3, 0.0)]));
        let eig = small_eigenvalues(&m).unwrap();
        assert!((eig[0] - c(-0.3, 0.0)).norm() < 1e-12);
        assert!((eig[1] - c(0.5, 0.1)).norm() < 1e-12);
    }
}

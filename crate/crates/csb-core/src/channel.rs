//! Quantum channels, transfer matrices and process fidelity.
//!
//! Channels are CPTP maps stored as Kraus operator sequences. The transfer
//! (superoperator) matrix acts on column-stacked density matrices:
//! `vec(R(ρ)) = G vec(ρ)` with `G = Σ_i R_i* ⊗ R_i`. A benchmarked unitary
//! carries its eigendecomposition `U = A diag(Λ) A†`, from which the channel
//! eigenbasis `C = A* ⊗ A` and the ideal channel spectrum are derived.

use crate::error::{CsbError, Result};
use crate::linalg::{
    self, c, conj, cr, ensure_square, identity, is_unitary, kron, max_abs_diff, CMat, CVec, C64,
};

/// Max-entry tolerance for construction-time validation.
pub const VALIDATION_TOL: f64 = 1e-10;
/// Tolerance for d² × d² reconstruction identities.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// A unitary gate together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct UnitaryGate {
    dim: usize,
    matrix: CMat,
    eigenvectors: CMat,
    eigenphases: Vec<C64>,
}

impl UnitaryGate {
    /// Build from a matrix, computing the eigendecomposition.
    pub fn new(matrix: CMat) -> Result<Self> {
        let (eigenvectors, eigenphases) = linalg::unitary_eigensystem(&matrix)?;
        Self::from_eigensystem(matrix, eigenvectors, eigenphases)
    }

    /// Build from a known eigensystem (used for gates whose eigenbasis is
    /// written down analytically). All invariants are validated.
    pub fn from_eigensystem(
        matrix: CMat,
        eigenvectors: CMat,
        eigenphases: Vec<C64>,
    ) -> Result<Self> {
        let dim = ensure_square(&matrix)?;
        if eigenvectors.nrows() != dim || eigenvectors.ncols() != dim {
            return Err(CsbError::DimensionMismatch {
                expected: dim,
                got: eigenvectors.nrows(),
            });
        }
        if eigenphases.len() != dim {
            return Err(CsbError::DimensionMismatch {
                expected: dim,
                got: eigenphases.len(),
            });
        }
        if !is_unitary(&matrix, VALIDATION_TOL) {
            return Err(CsbError::InvalidGate("gate matrix is not unitary".into()));
        }
        if !is_unitary(&eigenvectors, VALIDATION_TOL) {
            return Err(CsbError::InvalidGate("eigenvector matrix is not unitary".into()));
        }
        if eigenphases.iter().any(|l| (l.norm() - 1.0).abs() > VALIDATION_TOL) {
            return Err(CsbError::InvalidGate("eigenphase off the unit circle".into()));
        }
        let rec = &eigenvectors
            * CMat::from_diagonal(&CVec::from_vec(eigenphases.clone()))
            * eigenvectors.adjoint();
        if max_abs_diff(&rec, &matrix) > VALIDATION_TOL {
            return Err(CsbError::InvalidGate(
                "eigensystem does not reproduce the gate matrix".into(),
            ));
        }
        Ok(Self {
            dim,
            matrix,
            eigenvectors,
            eigenphases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn eigenphases(&self) -> &[C64] {
        &self.eigenphases
    }

    /// k-th eigenstate |ψ_k⟩ (column of A).
    pub fn eigenstate(&self, k: usize) -> CVec {
        self.eigenvectors.column(k).into_owned()
    }

    /// The ideal (noise-free) channel of this gate.
    pub fn channel(&self) -> QuantumChannel {
        QuantumChannel::from_unitary(&self.matrix).expect("unitary gives a valid channel")
    }
}

/// A CPTP map stored as a Kraus operator sequence.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    dim: usize,
    kraus_ops: Vec<CMat>,
}

impl QuantumChannel {
    /// Validates the completeness relation Σ R†R = I (max entry deviation
    /// below [`VALIDATION_TOL`]), which is equivalent to trace preservation of
    /// the transfer matrix.
    pub fn new(kraus_ops: Vec<CMat>) -> Result<Self> {
        if kraus_ops.is_empty() {
            return Err(CsbError::InvalidChannel(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        let dim = ensure_square(&kraus_ops[0])?;
        for op in &kraus_ops {
            let d = ensure_square(op)?;
            if d != dim {
                return Err(CsbError::DimensionMismatch {
                    expected: dim,
                    got: d,
                });
            }
        }
        let mut sum = CMat::zeros(dim, dim);
        for op in &kraus_ops {
            sum += op.adjoint() * op;
        }
        if max_abs_diff(&sum, &identity(dim)) > VALIDATION_TOL {
            return Err(CsbError::InvalidChannel(
                "Kraus completeness relation violated".into(),
            ));
        }
        Ok(Self { dim, kraus_ops })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            kraus_ops: vec![identity(dim)],
        }
    }

    pub fn from_unitary(u: &CMat) -> Result<Self> {
        if !is_unitary(u, VALIDATION_TOL) {
            return Err(CsbError::InvalidChannel("Kraus operator is not unitary".into()));
        }
        Self::new(vec![u.clone()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus_ops(&self) -> &[CMat] {
        &self.kraus_ops
    }

    /// Apply to a density matrix: ρ → Σ R ρ R†.
    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        let d = ensure_square(rho)?;
        if d != self.dim {
            return Err(CsbError::DimensionMismatch {
                expected: self.dim,
                got: d,
            });
        }
        let mut out = CMat::zeros(d, d);
        for op in &self.kraus_ops {
            out += op * rho * op.adjoint();
        }
        Ok(out)
    }

    /// Transfer matrix G = Σ R* ⊗ R acting on column-stacked density matrices.
    pub fn transfer_matrix(&self) -> CMat {
        let d2 = self.dim * self.dim;
        let mut g = CMat::zeros(d2, d2);
        for op in &self.kraus_ops {
            g += kron(&conj(op), op);
        }
        g
    }
}

/// Column-stacking vectorization: component r + c·d holds ρ[r][c].
pub fn vectorize(rho: &CMat) -> Result<CVec> {
    ensure_square(rho)?;
    Ok(CVec::from_column_slice(rho.as_slice()))
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &CVec) -> Result<CMat> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(CsbError::InvalidParameter(format!(
            "vector length {n} is not a perfect square"
        )));
    }
    Ok(CMat::from_column_slice(d, d, v.as_slice()))
}

/// The eigenbasis of an ideal gate channel: C = A* ⊗ A together with the
/// ideal channel eigenvalues k[(a, b)] = Λ_a Λ_b*, stored at linear index
/// a + b·d to match the column-stacking convention.
#[derive(Debug, Clone)]
pub struct EigenbasisFrame {
    dim: usize,
    basis: CMat,
    ideal_eigenvalues: Vec<C64>,
}

impl EigenbasisFrame {
    pub fn new(gate: &UnitaryGate) -> Self {
        let d = gate.dim();
        let a = gate.eigenvectors();
        let basis = kron(&conj(a), a);
        let mut ideal = vec![cr(0.0); d * d];
        for b in 0..d {
            for a_idx in 0..d {
                ideal[a_idx + b * d] = gate.eigenphases()[a_idx] * gate.eigenphases()[b].conj();
            }
        }
        Self {
            dim: d,
            basis,
            ideal_eigenvalues: ideal,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_squared(&self) -> usize {
        self.dim * self.dim
    }

    /// C = A* ⊗ A.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn ideal_eigenvalues(&self) -> &[C64] {
        &self.ideal_eigenvalues
    }

    /// Linear index of the eigenoperator |ψ_a⟩⟨ψ_b|.
    pub fn index(&self, a: usize, b: usize) -> usize {
        a + b * self.dim
    }

    /// Ideal eigenvalues of the four eigenoperators {aa, ab, ba, bb} spanned
    /// by a preparation pair.
    pub fn pair_eigenvalues(&self, a: usize, b: usize) -> [C64; 4] {
        [
            self.ideal_eigenvalues[self.index(a, a)],
            self.ideal_eigenvalues[self.index(a, b)],
            self.ideal_eigenvalues[self.index(b, a)],
            self.ideal_eigenvalues[self.index(b, b)],
        ]
    }

    /// Multiplicity of the trivial channel eigenvalue λ = 1.
    pub fn trivial_multiplicity(&self) -> usize {
        self.ideal_eigenvalues
            .iter()
            .filter(|l| (*l - cr(1.0)).norm() < 1e-9)
            .count()
    }

    /// Ideal transfer matrix rebuilt as C diag(k) C†.
    pub fn ideal_transfer_matrix(&self) -> CMat {
        &self.basis
            * CMat::from_diagonal(&CVec::from_vec(self.ideal_eigenvalues.clone()))
            * self.basis.adjoint()
    }
}

/// Channel matrix expressed in the gate eigenbasis: K = C† G C.
pub fn channel_in_eigenbasis(channel: &QuantumChannel, frame: &EigenbasisFrame) -> Result<CMat> {
    if channel.dim() != frame.dim() {
        return Err(CsbError::DimensionMismatch {
            expected: frame.dim(),
            got: channel.dim(),
        });
    }
    let g = channel.transfer_matrix();
    Ok(frame.basis().adjoint() * g * frame.basis())
}

/// Process fidelity tr(G_U† G_noisy) / d² between an ideal gate and a noisy
/// implementation of it.
pub fn process_fidelity(ideal: &UnitaryGate, noisy: &QuantumChannel) -> Result<f64> {
    if ideal.dim() != noisy.dim() {
        return Err(CsbError::DimensionMismatch {
            expected: ideal.dim(),
            got: noisy.dim(),
        });
    }
    let gu = kron(&conj(ideal.matrix()), ideal.matrix());
    let g = noisy.transfer_matrix();
    let mut tr = c(0.0, 0.0);
    for (x, y) in gu.iter().zip(g.iter()) {
        tr += x.conj() * y;
    }
    let d2 = (ideal.dim() * ideal.dim()) as f64;
    let f = tr / cr(d2);
    if f.im.abs() > 1e-12 {
        return Err(CsbError::Numerical(format!(
            "process fidelity has imaginary residue {:.3e}",
            f.im
        )));
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Matrix as nested rows of [re, im] pairs, the JSON interchange form for
/// custom gate input.
pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|cix| [m[(r, cix)].re, m[(r, cix)].im]).collect())
        .collect()
}

/// Inverse of [`matrix_to_rows`]; rejects ragged input.
pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let nr = rows.len();
    if nr == 0 {
        return Err(CsbError::Schema("matrix has no rows".into()));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(CsbError::Schema("matrix rows have unequal lengths".into()));
    }
    Ok(CMat::from_fn(nr, nc, |r, cix| {
        c(rows[r][cix][0], rows[r][cix][1])
    }))
}

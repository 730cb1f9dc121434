//! Built-in gates and small matrix constructors.

use crate::channel::UnitaryGate;
use crate::linalg::{c, cr, identity, CMat, CVec, C64};

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// Identity gate on dimension d.
pub fn identity_gate(d: usize) -> UnitaryGate {
    UnitaryGate::from_eigensystem(identity(d), identity(d), vec![cr(1.0); d])
        .expect("identity eigensystem is exact")
}

/// Three-qubit Toffoli gate (controls on qubits 0 and 1, target on qubit 2;
/// basis index q0·4 + q1·2 + q2).
///
/// The eigenbasis is written down analytically so that the ordering of the
/// degenerate +1 subspace is deterministic: eigenstates 0..=5 are the
/// computational states |000⟩..|101⟩, eigenstate 6 is |11+⟩ and eigenstate 7
/// is |11−⟩, the sole Λ = −1 eigenstate.
pub fn toffoli() -> UnitaryGate {
    let mut u = identity(8);
    u[(6, 6)] = cr(0.0);
    u[(7, 7)] = cr(0.0);
    u[(6, 7)] = cr(1.0);
    u[(7, 6)] = cr(1.0);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut a = CMat::zeros(8, 8);
    for k in 0..6 {
        a[(k, k)] = cr(1.0);
    }
    a[(6, 6)] = cr(s);
    a[(7, 6)] = cr(s);
    a[(6, 7)] = cr(s);
    a[(7, 7)] = cr(-s);

    let mut phases: Vec<C64> = vec![cr(1.0); 7];
    phases.push(cr(-1.0));

    UnitaryGate::from_eigensystem(u, a, phases).expect("Toffoli eigensystem is exact")
}

/// Basis ket |k⟩ of dimension d.
pub fn basis_state(d: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[k] = cr(1.0);
    v
}

//! Parametric noise channels and their placement around the benchmarked gate.
//!
//! Noise is described per qubit by tagged factors (amplitude damping, Y-axis
//! rotation, depolarizing, or sequential compositions of those), tensored to
//! the full register and attached to one of three circuit locations: the gate
//! itself, state preparation, or measurement.

use serde::{Deserialize, Serialize};

use crate::channel::{process_fidelity, QuantumChannel, UnitaryGate};
use crate::error::{CsbError, Result};
use crate::linalg::{cr, identity, kron, CMat};

/// Circuit location a noise spec is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Follows every application of the gate.
    Gate,
    /// Follows state preparation.
    Prep,
    /// Precedes measurement.
    Meas,
}

/// One tagged single-qubit noise process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseFactor {
    AmplitudeDamping { gamma: f64 },
    YRotation { theta: f64 },
    Depolarizing { p: f64 },
    /// Factors applied in listed order (first entry acts first).
    Composed { factors: Vec<NoiseFactor> },
}

impl NoiseFactor {
    /// The single-qubit channel this factor describes.
    pub fn channel(&self) -> Result<QuantumChannel> {
        match self {
            NoiseFactor::AmplitudeDamping { gamma } => amplitude_damping(*gamma),
            NoiseFactor::YRotation { theta } => y_rotation(*theta),
            NoiseFactor::Depolarizing { p } => depolarizing(*p, 2),
            NoiseFactor::Composed { factors } => {
                let mut acc = QuantumChannel::identity(2);
                for f in factors {
                    acc = compose(&f.channel()?, &acc)?;
                }
                Ok(acc)
            }
        }
    }
}

/// Per-qubit noise factors at one circuit location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub placement: Placement,
    pub qubit_factors: Vec<NoiseFactor>,
}

impl NoiseSpec {
    /// Noise-free spec for an n-qubit register.
    pub fn identity(placement: Placement, qubits: usize) -> Self {
        Self {
            placement,
            qubit_factors: vec![NoiseFactor::Composed { factors: vec![] }; qubits],
        }
    }

    /// The same factor on every qubit.
    pub fn uniform(placement: Placement, factor: NoiseFactor, qubits: usize) -> Self {
        Self {
            placement,
            qubit_factors: vec![factor; qubits],
        }
    }

    /// Tensor the per-qubit factors into the full register channel.
    pub fn channel(&self) -> Result<QuantumChannel> {
        let factors = self
            .qubit_factors
            .iter()
            .map(|f| f.channel())
            .collect::<Result<Vec<_>>>()?;
        tensor_channels(&factors)
    }
}

/// The three noise locations of one experiment: E0 after each gate, E1 after
/// preparation, E2 before measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTriple {
    pub gate: NoiseSpec,
    pub prep: NoiseSpec,
    pub meas: NoiseSpec,
}

impl NoiseTriple {
    pub fn identity(qubits: usize) -> Self {
        Self {
            gate: NoiseSpec::identity(Placement::Gate, qubits),
            prep: NoiseSpec::identity(Placement::Prep, qubits),
            meas: NoiseSpec::identity(Placement::Meas, qubits),
        }
    }

    /// The same per-qubit factor at all three locations.
    pub fn uniform(factor: NoiseFactor, qubits: usize) -> Self {
        Self {
            gate: NoiseSpec::uniform(Placement::Gate, factor.clone(), qubits),
            prep: NoiseSpec::uniform(Placement::Prep, factor.clone(), qubits),
            meas: NoiseSpec::uniform(Placement::Meas, factor, qubits),
        }
    }

    pub fn channels(&self) -> Result<(QuantumChannel, QuantumChannel, QuantumChannel)> {
        Ok((
            self.gate.channel()?,
            self.prep.channel()?,
            self.meas.channel()?,
        ))
    }
}

/// Single-qubit amplitude damping with decay probability γ.
pub fn amplitude_damping(gamma: f64) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(CsbError::InvalidParameter(format!(
            "amplitude damping gamma {gamma} outside [0, 1]"
        )));
    }
    let mut k0 = identity(2);
    k0[(1, 1)] = cr((1.0 - gamma).sqrt());
    let mut k1 = CMat::zeros(2, 2);
    k1[(0, 1)] = cr(gamma.sqrt());
    QuantumChannel::new(vec![k0, k1])
}

/// Unitary rotation exp(−iθY/2) about the Bloch Y axis.
pub fn y_rotation(theta: f64) -> Result<QuantumChannel> {
    if !theta.is_finite() {
        return Err(CsbError::InvalidParameter("rotation angle must be finite".into()));
    }
    let (s, c_) = (theta / 2.0).sin_cos();
    let k = CMat::from_row_slice(2, 2, &[cr(c_), cr(-s), cr(s), cr(c_)]);
    QuantumChannel::new(vec![k])
}

/// Depolarizing channel ρ → (1−p)ρ + p·I/d on dimension d.
pub fn depolarizing(p: f64, d: usize) -> Result<QuantumChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CsbError::InvalidParameter(format!(
            "depolarizing probability {p} outside [0, 1]"
        )));
    }
    if d == 0 {
        return Err(CsbError::InvalidParameter("dimension must be positive".into()));
    }
    let mut kraus = vec![identity(d) * cr((1.0 - p).sqrt())];
    let w = cr((p / d as f64).sqrt());
    for i in 0..d {
        for j in 0..d {
            let mut k = CMat::zeros(d, d);
            k[(i, j)] = w;
            kraus.push(k);
        }
    }
    QuantumChannel::new(kraus)
}

/// Tensor product of channels; the Kraus set is every Kronecker product of
/// one operator per factor, so the count is the product of factor counts.
pub fn tensor_channels(factors: &[QuantumChannel]) -> Result<QuantumChannel> {
    if factors.is_empty() {
        return Err(CsbError::InvalidParameter(
            "tensor product needs at least one factor".into(),
        ));
    }
    let mut acc: Vec<CMat> = factors[0].kraus_ops().to_vec();
    for f in &factors[1..] {
        let mut next = Vec::with_capacity(acc.len() * f.kraus_ops().len());
        for a in &acc {
            for b in f.kraus_ops() {
                next.push(kron(a, b));
            }
        }
        acc = next;
    }
    QuantumChannel::new(acc)
}

/// Sequential composition later ∘ earlier; Kraus set is all pairwise products.
pub fn compose(later: &QuantumChannel, earlier: &QuantumChannel) -> Result<QuantumChannel> {
    if later.dim() != earlier.dim() {
        return Err(CsbError::DimensionMismatch {
            expected: earlier.dim(),
            got: later.dim(),
        });
    }
    let mut kraus = Vec::with_capacity(later.kraus_ops().len() * earlier.kraus_ops().len());
    for l in later.kraus_ops() {
        for e in earlier.kraus_ops() {
            kraus.push(l * e);
        }
    }
    QuantumChannel::new(kraus)
}

/// Outcome of the default-noise calibration.
#[derive(Debug, Clone)]
pub struct CalibratedNoise {
    pub gamma: f64,
    pub theta: f64,
    pub triple: NoiseTriple,
    /// Process fidelity of gate-noise ∘ gate against the ideal gate.
    pub oracle_fidelity: f64,
}

/// Ratio θ/γ used by the one-knob calibration search.
pub const CALIBRATION_THETA_RATIO: f64 = 5.0;

fn default_factor(gamma: f64) -> NoiseFactor {
    NoiseFactor::Composed {
        factors: vec![
            NoiseFactor::YRotation {
                theta: CALIBRATION_THETA_RATIO * gamma,
            },
            NoiseFactor::AmplitudeDamping { gamma },
        ],
    }
}

/// Calibrate the default per-qubit noise ⊗[AD(γ) ∘ RY(5γ)] so that the oracle
/// process fidelity of the noisy gate hits `target` within `tolerance`.
///
/// The same spec is used at all three locations; only the gate-noise
/// composition enters the fidelity target. Deterministic: a fixed bisection
/// over γ with θ locked to 5γ.
pub fn calibrated_default_noise(
    gate: &UnitaryGate,
    target: f64,
    tolerance: f64,
) -> Result<CalibratedNoise> {
    if !(0.5..=1.0).contains(&target) || target <= 0.5 {
        return Err(CsbError::InvalidParameter(format!(
            "calibration target {target} outside (0.5, 1]"
        )));
    }
    if tolerance <= 0.0 {
        return Err(CsbError::InvalidParameter("tolerance must be positive".into()));
    }
    let qubits = gate.dim().trailing_zeros() as usize;
    if 1usize << qubits != gate.dim() {
        return Err(CsbError::InvalidParameter(
            "default noise calibration needs a power-of-two dimension".into(),
        ));
    }

    let fidelity_at = |gamma: f64| -> Result<f64> {
        let spec = NoiseSpec::uniform(Placement::Gate, default_factor(gamma), qubits);
        let noisy = compose(&spec.channel()?, &gate.channel())?;
        process_fidelity(gate, &noisy)
    };

    let build = |gamma: f64, fidelity: f64| CalibratedNoise {
        gamma,
        theta: CALIBRATION_THETA_RATIO * gamma,
        triple: NoiseTriple::uniform(default_factor(gamma), qubits),
        oracle_fidelity: fidelity,
    };

    if target >= 1.0 - 1e-12 {
        return Ok(build(0.0, 1.0));
    }

    let (mut lo, mut hi) = (0.0f64, 0.3f64);
    if fidelity_at(hi)? > target {
        return Err(CsbError::UnreachableTarget { target });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fidelity_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let achieved = fidelity_at(gamma)?;
    if (achieved - target).abs() > tolerance {
        return Err(CsbError::UnreachableTarget { target });
    }
    Ok(build(gamma, achieved))
}

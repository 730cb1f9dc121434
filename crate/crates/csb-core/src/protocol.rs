//! Benchmarking circuit execution: eigenstate-superposition preparations,
//! repeated noisy gate applications, exact survival probabilities and
//! shot-sampled decay curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channel::{vectorize, QuantumChannel, UnitaryGate};
use crate::error::{CsbError, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::noise::NoiseTriple;

/// Odd constant for deriving per-pair RNG streams from the master seed.
pub const SUBSEED_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

/// Deterministic sub-seed for the curve of pair `pair_index`.
pub fn pair_subseed(master_seed: u64, pair_index: usize) -> u64 {
    master_seed ^ (pair_index as u64).wrapping_mul(SUBSEED_MULTIPLIER)
}

/// One initial state of the protocol: |ψ_ab⟩ built from eigenstates a and b.
#[derive(Debug, Clone)]
pub struct PreparationPair {
    pub a: usize,
    pub b: usize,
    /// |ψ_a⟩ for a = b, (|ψ_a⟩ + |ψ_b⟩)/√2 otherwise. Unit norm.
    pub state: CVec,
    /// Ideal channel eigenvalues of the spanned eigenoperators {aa, ab, ba, bb}.
    pub ideal_eigenvalues: [C64; 4],
}

impl PreparationPair {
    fn new(gate: &UnitaryGate, a: usize, b: usize) -> Self {
        let state = if a == b {
            gate.eigenstate(a)
        } else {
            (gate.eigenstate(a) + gate.eigenstate(b)).scale(std::f64::consts::FRAC_1_SQRT_2)
        };
        debug_assert!((state.norm() - 1.0).abs() < 1e-12);
        let l = gate.eigenphases();
        let ideal_eigenvalues = [
            l[a] * l[a].conj(),
            l[a] * l[b].conj(),
            l[b] * l[a].conj(),
            l[b] * l[b].conj(),
        ];
        Self {
            a,
            b,
            state,
            ideal_eigenvalues,
        }
    }

    /// Projector |ψ_ab⟩⟨ψ_ab|.
    pub fn density(&self) -> CMat {
        &self.state * self.state.adjoint()
    }
}

/// All pairs (a, b) with 0 ≤ a ≤ b < d in lexicographic order: d(d+1)/2 of them.
pub fn enumerate_preparations(gate: &UnitaryGate) -> Vec<PreparationPair> {
    let d = gate.dim();
    let mut pairs = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        for b in a..d {
            pairs.push(PreparationPair::new(gate, a, b));
        }
    }
    pairs
}

/// Survival probabilities of one preparation pair over the depth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub a: usize,
    pub b: usize,
    pub depths: Vec<u32>,
    pub p_hat: Vec<f64>,
    pub shots: u32,
    /// True when `p_hat` holds exact probabilities rather than shot averages.
    pub exact: bool,
}

impl DecayCurve {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Depths must be the contiguous integers 0..n.
    pub fn has_uniform_grid(&self) -> bool {
        self.depths.iter().enumerate().all(|(i, &l)| l as usize == i)
    }
}

/// Precomputed transfer machinery for one noisy experiment:
/// P(L) = ⟨⟨ρ_ab| G_meas (G_gate G_U)^L G_prep |ρ_ab⟩⟩.
#[derive(Debug, Clone)]
pub struct TransferKernel {
    dim: usize,
    prep: CMat,
    step: CMat,
    meas: CMat,
}

impl TransferKernel {
    pub fn new(gate: &UnitaryGate, noise: &NoiseTriple) -> Result<Self> {
        let (e0, e1, e2) = noise.channels()?;
        Self::from_channels(gate, &e0, &e1, &e2)
    }

    pub fn from_channels(
        gate: &UnitaryGate,
        gate_noise: &QuantumChannel,
        prep_noise: &QuantumChannel,
        meas_noise: &QuantumChannel,
    ) -> Result<Self> {
        let d = gate.dim();
        for ch in [gate_noise, prep_noise, meas_noise] {
            if ch.dim() != d {
                return Err(CsbError::DimensionMismatch {
                    expected: d,
                    got: ch.dim(),
                });
            }
        }
        let g_u = gate.channel().transfer_matrix();
        Ok(Self {
            dim: d,
            prep: prep_noise.transfer_matrix(),
            step: gate_noise.transfer_matrix() * g_u,
            meas: meas_noise.transfer_matrix(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exact survival probabilities for L = 0..=l_max.
    pub fn exact_curve(&self, pair: &PreparationPair, l_max: u32) -> Result<Vec<f64>> {
        let rho = vectorize(&pair.density())?;
        if rho.len() != self.dim * self.dim {
            return Err(CsbError::DimensionMismatch {
                expected: self.dim * self.dim,
                got: rho.len(),
            });
        }
        // ⟨⟨ρ| G_meas as a fixed left vector.
        let left = self.meas.adjoint() * &rho;
        let mut v = &self.prep * &rho;
        let mut out = Vec::with_capacity(l_max as usize + 1);
        for _ in 0..=l_max {
            let p = left.dotc(&v);
            if p.im.abs() > 1e-9 || p.re < -1e-9 || p.re > 1.0 + 1e-9 {
                return Err(CsbError::Numerical(format!(
                    "survival probability {} + {}i outside tolerance",
                    p.re, p.im
                )));
            }
            out.push(p.re.clamp(0.0, 1.0));
            v = &self.step * v;
        }
        Ok(out)
    }
}

/// Exact survival probability after L noisy gate applications with SPAM noise.
pub fn exact_survival_probability(
    prep_noise: &QuantumChannel,
    gate_noise: &QuantumChannel,
    meas_noise: &QuantumChannel,
    gate: &UnitaryGate,
    pair: &PreparationPair,
    l: u32,
) -> Result<f64> {
    let kernel = TransferKernel::from_channels(gate, gate_noise, prep_noise, meas_noise)?;
    Ok(kernel.exact_curve(pair, l)?[l as usize])
}

/// Binomially sample a decay curve from exact probabilities. Deterministic
/// for a fixed seed; depths are resampled independently from one stream.
pub fn sample_curve(
    pair: &PreparationPair,
    exact: &[f64],
    shots: u32,
    seed: u64,
) -> Result<DecayCurve> {
    if shots == 0 {
        return Err(CsbError::InvalidParameter("shots must be at least 1".into()));
    }
    if let Some(p) = exact.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CsbError::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut p_hat = Vec::with_capacity(exact.len());
    for &p in exact {
        let mut successes = 0u32;
        for _ in 0..shots {
            if rng.gen::<f64>() < p {
                successes += 1;
            }
        }
        p_hat.push(f64::from(successes) / f64::from(shots));
    }
    Ok(DecayCurve {
        a: pair.a,
        b: pair.b,
        depths: (0..exact.len() as u32).collect(),
        p_hat,
        shots,
        exact: false,
    })
}

/// Protocol execution parameters.
#[derive(Debug, Clone)]
pub struct ProtocolSettings {
    pub l_max: u32,
    pub shots: u32,
    pub seed: u64,
    /// Skip shot sampling and record exact probabilities.
    pub exact: bool,
}

/// Run the full protocol: one decay curve per enumerated preparation pair,
/// each over L = 0..=l_max, sampled with an independent per-pair sub-seed.
pub fn run_protocol(
    gate: &UnitaryGate,
    noise: &NoiseTriple,
    settings: &ProtocolSettings,
) -> Result<Vec<DecayCurve>> {
    let kernel = TransferKernel::new(gate, noise)?;
    let pairs = enumerate_preparations(gate);
    pairs
        .par_iter()
        .enumerate()
        .map(|(idx, pair)| {
            let exact = kernel.exact_curve(pair, settings.l_max)?;
            if settings.exact {
                Ok(DecayCurve {
                    a: pair.a,
                    b: pair.b,
                    depths: (0..=settings.l_max).collect(),
                    p_hat: exact,
                    shots: settings.shots,
                    exact: true,
                })
            } else {
                sample_curve(
                    pair,
                    &exact,
                    settings.shots,
                    pair_subseed(settings.seed, idx),
                )
            }
        })
        .collect()
}

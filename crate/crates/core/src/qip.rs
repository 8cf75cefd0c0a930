//! Quantum inner-product engine.
//!
//! `|00> --U_a(x_i)--U_b(x_w)-->` leaves `<x_w|x_i>` on the `|11>` amplitude,
//! so the probability of reading `|11>` is the squared overlap. In ancilla
//! readout a third qubit (index 2) is flipped by a multi-controlled X on the
//! two data qubits (0 and 1), and the ancilla's excitation probability is read
//! instead.

use std::num::NonZeroU32;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::encoder::{build_ua, build_ub, EncoderError, TargetVec};
use crate::statevec::{GateOp, StateError, StateVector, Unitary4};

/// Slack allowed outside `[0, 1]` before clamping.
pub const RANGE_SLACK: f64 = 1e-12;

const DATA_QUBITS: (usize, usize) = (0, 1);
const ANCILLA: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QipError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("readout probability {0} outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReadoutMode {
    /// Probability of the `|11>` basis state of the data register.
    Direct,
    /// Probability of the ancilla reading 1 after the multi-controlled X.
    Ancilla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(NonZeroU32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotConfig {
    pub shots: Shots,
    pub rng_seed: u64,
}

impl ShotConfig {
    pub fn exact() -> Self {
        Self { shots: Shots::Exact, rng_seed: 0 }
    }
}

/// Both encoding operators of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVector {
    target: TargetVec,
    prepare: Unitary4,
    unprepare: Unitary4,
}

impl EncodedVector {
    pub fn new(target: TargetVec) -> Result<Self, QipError> {
        Ok(Self {
            target,
            prepare: build_ua(&target)?,
            unprepare: build_ub(&target)?,
        })
    }

    pub fn target(&self) -> &TargetVec {
        &self.target
    }

    pub fn prepare(&self) -> &Unitary4 {
        &self.prepare
    }

    pub fn unprepare(&self) -> &Unitary4 {
        &self.unprepare
    }
}

fn clamp_probability(p: f64) -> Result<f64, QipError> {
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&p) {
        return Err(QipError::OutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Runs `U_b(xw) · U_a(xi) |00>` and reads the overlap probability.
pub fn overlap_probability(xi: &EncodedVector, xw: &EncodedVector, mode: ReadoutMode) -> Result<f64, QipError> {
    // Operators in `EncodedVector` were verified unitary at synthesis.
    let p = match mode {
        ReadoutMode::Direct => StateVector::zero_state(2)?
            .apply_unitary_unchecked(&xi.prepare, DATA_QUBITS)?
            .apply_unitary_unchecked(&xw.unprepare, DATA_QUBITS)?
            .probability(3)?,
        ReadoutMode::Ancilla => StateVector::zero_state(3)?
            .apply_unitary_unchecked(&xi.prepare, DATA_QUBITS)?
            .apply_unitary_unchecked(&xw.unprepare, DATA_QUBITS)?
            .apply_gate(&GateOp::mcx(vec![DATA_QUBITS.0, DATA_QUBITS.1], ANCILLA))?
            .qubit_one_probability(ANCILLA)?,
    };
    clamp_probability(p)
}

/// `|<xw|xi>|^2` from the circuit, clamped to `[0, 1]`.
pub fn inner_product_sq(xi: &TargetVec, xw: &TargetVec, mode: ReadoutMode) -> Result<f64, QipError> {
    let a = EncodedVector::new(*xi)?;
    let b = EncodedVector::new(*xw)?;
    overlap_probability(&a, &b, mode)
}

/// Fraction of `n` seeded Bernoulli(`p`) trials that succeed.
pub fn sample_fraction(p: f64, shots: NonZeroU32, seed: u64) -> f64 {
    let n = u64::from(shots.get());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped to [0, 1]")
        .sample(&mut rng);
    count as f64 / n as f64
}

/// Finite-shot estimate of [`inner_product_sq`]; exact when `cfg.shots` is `Exact`.
pub fn inner_product_sq_sampled(xi: &TargetVec, xw: &TargetVec, cfg: &ShotConfig) -> Result<f64, QipError> {
    let p = inner_product_sq(xi, xw, ReadoutMode::Direct)?;
    Ok(match cfg.shots {
        Shots::Exact => p,
        Shots::Finite(n) => sample_fraction(p, n, cfg.rng_seed),
    })
}

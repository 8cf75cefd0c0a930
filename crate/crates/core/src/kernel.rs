//! Class-means kernel classifier.
//!
//! Points are mapped onto the cone `[x, y, sqrt((x^2+y^2)/2), a3]` (with `a3`
//! completing the unit norm) and compared with the squared-overlap kernel
//! `k(p, q) = |<phi(p)|phi(q)>|^2`. Training only computes the offset
//!
//! ```text
//! b = 1/2 [ m-^-2 sum_{i,j in -} k(x_i, x_j) - m+^-2 sum_{i,j in +} k(x_i, x_j) ]
//! ```
//!
//! and a point is labelled by the sign of
//! `m+^-1 sum_{i in +} k(x, x_i) - m-^-1 sum_{i in -} k(x, x_i) + b`.

use std::fmt;
use std::str::FromStr;

use qkernel_oracle::{ClassicalModel, OracleError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{EncoderError, TargetVec};
use crate::qip::{overlap_probability, sample_fraction, EncodedVector, QipError, ReadoutMode, ShotConfig, Shots};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("point ({x}, {y}) is outside the feature map domain")]
    Domain { x: f64, y: f64 },
    #[error("{0} class has no samples")]
    EmptyClass(Label),
    #[error(transparent)]
    Qip(#[from] QipError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

impl From<OracleError> for KernelError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Domain { x, y, .. } => KernelError::Domain { x, y },
            OracleError::EmptyClass { label } => {
                KernelError::EmptyClass(if label > 0 { Label::Positive } else { Label::Negative })
            }
            // Labels are typed in this crate; the oracle never sees anything else.
            OracleError::InvalidLabel(_) => unreachable!("labels are always +1 or -1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    /// Sign rule with an exact zero mapped to `Positive`.
    pub fn from_decision(value: f64) -> Self {
        if value >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

/// Image of a point under the cone feature map. Unit norm, last two components non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVec4([f64; 4]);

impl FeatureVec4 {
    pub fn components(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn target(&self) -> TargetVec {
        TargetVec::new(self.0).expect("feature vectors are unit norm")
    }
}

pub fn feature_map(p: &Point2) -> Result<FeatureVec4, KernelError> {
    let (x, y) = (p.x, p.y);
    if !(x.is_finite() && y.is_finite()) {
        return Err(KernelError::Domain { x, y });
    }
    let cone = ((x * x + y * y) / 2.0).sqrt();
    let radicand = 1.0 - x * x - y * y - cone * cone;
    if radicand < -1e-12 {
        return Err(KernelError::Domain { x, y });
    }
    Ok(FeatureVec4([x, y, cone, radicand.max(0.0).sqrt()]))
}

/// How kernel values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelEngine {
    /// Circuit simulation with the given readout.
    Quantum { readout: ReadoutMode, shots: ShotConfig },
    /// Direct `(v . w)^2`, no circuit.
    Oracle,
}

impl KernelEngine {
    pub fn exact(readout: ReadoutMode) -> Self {
        KernelEngine::Quantum { readout, shots: ShotConfig::exact() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelEngine::Quantum { readout: ReadoutMode::Direct, .. } => "direct",
            KernelEngine::Quantum { readout: ReadoutMode::Ancilla, .. } => "ancilla",
            KernelEngine::Oracle => "oracle",
        }
    }

    pub fn shots(&self) -> Shots {
        match self {
            KernelEngine::Quantum { shots, .. } => shots.shots,
            KernelEngine::Oracle => Shots::Exact,
        }
    }
}

/// Engine kind as named on the command line and in model files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Direct,
    Ancilla,
    Oracle,
}

impl EngineKind {
    pub fn with_shots(self, shots: Shots, rng_seed: u64) -> KernelEngine {
        let shots = ShotConfig { shots, rng_seed };
        match self {
            EngineKind::Direct => KernelEngine::Quantum { readout: ReadoutMode::Direct, shots },
            EngineKind::Ancilla => KernelEngine::Quantum { readout: ReadoutMode::Ancilla, shots },
            EngineKind::Oracle => KernelEngine::Oracle,
        }
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(EngineKind::Direct),
            "ancilla" => Ok(EngineKind::Ancilla),
            "oracle" => Ok(EngineKind::Oracle),
            other => Err(format!("unknown engine '{other}', expected direct, ancilla or oracle")),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Direct => "direct",
            EngineKind::Ancilla => "ancilla",
            EngineKind::Oracle => "oracle",
        })
    }
}

impl FromStr for Shots {
    type Err = String;

    /// `exact` or a positive shot count.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        s.parse::<std::num::NonZeroU32>()
            .map(Shots::Finite)
            .map_err(|_| format!("invalid shots '{s}', expected 'exact' or a positive integer"))
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

/// A feature vector ready for kernel evaluation with a given engine.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelInput {
    features: FeatureVec4,
    encoded: Option<EncodedVector>,
}

impl KernelInput {
    pub fn new(features: FeatureVec4, engine: &KernelEngine) -> Result<Self, KernelError> {
        let encoded = match engine {
            KernelEngine::Quantum { .. } => Some(EncodedVector::new(features.target())?),
            KernelEngine::Oracle => None,
        };
        Ok(Self { features, encoded })
    }

    pub fn features(&self) -> &FeatureVec4 {
        &self.features
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fingerprint(f: &FeatureVec4) -> u64 {
    f.0.iter().fold(0u64, |h, c| mix(h ^ c.to_bits()))
}

/// Shot seed for a pair of vectors: depends on the base seed and on the
/// unordered pair, so that the sampled kernel stays symmetric and does not
/// depend on evaluation order.
fn pair_seed(base: u64, a: &FeatureVec4, b: &FeatureVec4) -> u64 {
    let (fa, fb) = (fingerprint(a), fingerprint(b));
    let (lo, hi) = if fa <= fb { (fa, fb) } else { (fb, fa) };
    mix(mix(base ^ lo) ^ hi.rotate_left(17))
}

pub fn kernel_inputs(
    features: &[FeatureVec4],
    engine: &KernelEngine,
) -> Result<Vec<KernelInput>, KernelError> {
    features.par_iter().map(|f| KernelInput::new(*f, engine)).collect()
}

/// `k(a, b)` in `[0, 1]`.
pub fn kernel_between(a: &KernelInput, b: &KernelInput, engine: &KernelEngine) -> Result<f64, KernelError> {
    match engine {
        KernelEngine::Oracle => Ok(qkernel_oracle::classical_inner_sq(a.features.components(), b.features.components())),
        KernelEngine::Quantum { readout, shots } => {
            let (Some(ea), Some(eb)) = (&a.encoded, &b.encoded) else {
                // Inputs prepared for the oracle engine: encode now.
                let ea = EncodedVector::new(a.features.target())?;
                let eb = EncodedVector::new(b.features.target())?;
                return kernel_between(
                    &KernelInput { features: a.features, encoded: Some(ea) },
                    &KernelInput { features: b.features, encoded: Some(eb) },
                    engine,
                );
            };
            let p = overlap_probability(ea, eb, *readout)?;
            Ok(match shots.shots {
                Shots::Exact => p,
                Shots::Finite(n) => sample_fraction(p, n, pair_seed(shots.rng_seed, &a.features, &b.features)),
            })
        }
    }
}

pub fn kernel_value(p1: &Point2, p2: &Point2, engine: &KernelEngine) -> Result<f64, KernelError> {
    let a = KernelInput::new(feature_map(p1)?, engine)?;
    let b = KernelInput::new(feature_map(p2)?, engine)?;
    kernel_between(&a, &b, engine)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub point: Point2,
    pub label: Label,
    pub features: FeatureVec4,
}

impl LabeledSample {
    pub fn new(point: Point2, label: Label) -> Result<Self, KernelError> {
        Ok(Self { point, label, features: feature_map(&point)? })
    }
}

/// Symmetric kernel matrix over a sample set, each unordered pair evaluated once.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn compute(inputs: &[KernelInput], engine: &KernelEngine) -> Result<Self, KernelError> {
        let n = inputs.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| kernel_between(&inputs[i], &inputs[j], engine)).collect())
            .collect::<Result<_, _>>()?;
        let mut values = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, k) in row.into_iter().enumerate() {
                let j = i + offset;
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

fn class_counts(samples: &[LabeledSample]) -> Result<(usize, usize), KernelError> {
    let pos = samples.iter().filter(|s| s.label == Label::Positive).count();
    let neg = samples.len() - pos;
    if pos == 0 {
        return Err(KernelError::EmptyClass(Label::Positive));
    }
    if neg == 0 {
        return Err(KernelError::EmptyClass(Label::Negative));
    }
    Ok((pos, neg))
}

/// Offset from a precomputed kernel matrix; sums run in index order.
pub fn bias_from_matrix(samples: &[LabeledSample], matrix: &KernelMatrix) -> Result<f64, KernelError> {
    let (pos, neg) = class_counts(samples)?;
    let mut pos_sum = 0.0;
    let mut neg_sum = 0.0;
    for (i, si) in samples.iter().enumerate() {
        for (j, sj) in samples.iter().enumerate() {
            if si.label != sj.label {
                continue;
            }
            match si.label {
                Label::Positive => pos_sum += matrix.get(i, j),
                Label::Negative => neg_sum += matrix.get(i, j),
            }
        }
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok(0.5 * (neg_sum / (neg * neg) - pos_sum / (pos * pos)))
}

pub fn compute_bias(samples: &[LabeledSample], engine: &KernelEngine) -> Result<f64, KernelError> {
    class_counts(samples)?;
    let features: Vec<FeatureVec4> = samples.iter().map(|s| s.features).collect();
    let inputs = kernel_inputs(&features, engine)?;
    let matrix = KernelMatrix::compute(&inputs, engine)?;
    bias_from_matrix(samples, &matrix)
}

/// Training samples, their prepared kernel inputs, and the offset. Immutable once built.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    samples: Vec<LabeledSample>,
    inputs: Vec<KernelInput>,
    bias: f64,
    engine: KernelEngine,
    positives: usize,
    negatives: usize,
}

impl TrainedModel {
    pub fn train(samples: Vec<LabeledSample>, engine: KernelEngine) -> Result<Self, KernelError> {
        let (positives, negatives) = class_counts(&samples)?;
        let features: Vec<FeatureVec4> = samples.iter().map(|s| s.features).collect();
        let inputs = kernel_inputs(&features, &engine)?;
        let matrix = KernelMatrix::compute(&inputs, &engine)?;
        let bias = bias_from_matrix(&samples, &matrix)?;
        Ok(Self { samples, inputs, bias, engine, positives, negatives })
    }

    /// Rebuilds a model whose offset is already known (e.g. loaded from disk).
    pub fn with_bias(samples: Vec<LabeledSample>, bias: f64, engine: KernelEngine) -> Result<Self, KernelError> {
        let (positives, negatives) = class_counts(&samples)?;
        let features: Vec<FeatureVec4> = samples.iter().map(|s| s.features).collect();
        let inputs = kernel_inputs(&features, &engine)?;
        Ok(Self { samples, inputs, bias, engine, positives, negatives })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn engine(&self) -> &KernelEngine {
        &self.engine
    }

    /// The same training set in the classical oracle's representation.
    pub fn to_classical(&self) -> ClassicalModel {
        ClassicalModel {
            samples: self.samples.iter().map(|s| (s.features.0, s.label.as_i8())).collect(),
            bias: self.bias,
        }
    }

    pub fn decision_value(&self, p: &Point2) -> Result<f64, KernelError> {
        let input = KernelInput::new(feature_map(p)?, &self.engine)?;
        let mut pos_sum = 0.0;
        let mut neg_sum = 0.0;
        for (sample, train) in self.samples.iter().zip(&self.inputs) {
            let k = kernel_between(&input, train, &self.engine)?;
            match sample.label {
                Label::Positive => pos_sum += k,
                Label::Negative => neg_sum += k,
            }
        }
        Ok(pos_sum / self.positives as f64 - neg_sum / self.negatives as f64 + self.bias)
    }

    pub fn classify(&self, p: &Point2) -> Result<Label, KernelError> {
        self.decision_value(p).map(Label::from_decision)
    }
}

pub fn classify(p: &Point2, model: &TrainedModel) -> Result<Label, KernelError> {
    model.classify(p)
}

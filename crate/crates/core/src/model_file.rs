//! On-disk model format (JSON).
//!
//! A model is fully determined by the grid, the circle and the engine, so the
//! file stores those plus the fitted offset. Labels are kept as a checksum of
//! the training set and must agree with the circle on load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{generate_grid, label_point, CircleSpec, DatasetError, GridSpec};
use crate::kernel::{EngineKind, KernelEngine, KernelError, Label, LabeledSample, TrainedModel};
use crate::qip::Shots;

pub const FORMAT_TAG: &str = "qkernel-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("malformed model file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("not a model file (format tag '{0}')")]
    Format(String),
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("invalid field '{field}': {reason}")]
    Field { field: &'static str, reason: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn field(field: &'static str, reason: impl Into<String>) -> ModelFileError {
    ModelFileError::Field { field, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub grid: GridSpec,
    pub circle: CircleSpec,
    pub engine: String,
    pub shots: String,
    pub seed: u64,
    pub bias: f64,
    pub labels: Vec<i8>,
}

/// Everything needed to rebuild a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub grid: GridSpec,
    pub circle: CircleSpec,
    pub engine: EngineKind,
    pub shots: Shots,
    pub seed: u64,
    pub bias: f64,
}

impl ModelSpec {
    pub fn kernel_engine(&self) -> KernelEngine {
        self.engine.with_shots(self.shots, self.seed)
    }
}

/// Labelled training grid.
pub fn training_set(grid: &GridSpec, circle: &CircleSpec) -> Result<Vec<LabeledSample>, ModelFileError> {
    circle.validate()?;
    generate_grid(grid)?
        .into_iter()
        .map(|p| LabeledSample::new(p, label_point(&p, circle)).map_err(ModelFileError::from))
        .collect()
}

pub fn to_file(spec: &ModelSpec, samples: &[LabeledSample]) -> ModelFile {
    ModelFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        grid: spec.grid,
        circle: spec.circle,
        engine: spec.engine.to_string(),
        shots: spec.shots.to_string(),
        seed: spec.seed,
        bias: spec.bias,
        labels: samples.iter().map(|s| s.label.as_i8()).collect(),
    }
}

pub fn to_json(spec: &ModelSpec, samples: &[LabeledSample]) -> String {
    let mut s = serde_json::to_string_pretty(&to_file(spec, samples)).expect("model file serializes");
    s.push('\n');
    s
}

/// Parses and validates a model file. Does not generate the grid.
pub fn parse(text: &str) -> Result<ModelSpec, ModelFileError> {
    let file: ModelFile = serde_json::from_str(text)?;
    validate(&file)
}

pub fn validate(file: &ModelFile) -> Result<ModelSpec, ModelFileError> {
    if file.format != FORMAT_TAG {
        return Err(ModelFileError::Format(file.format.clone()));
    }
    if file.version != FORMAT_VERSION {
        return Err(ModelFileError::Version(file.version));
    }
    let expected = file.grid.point_count()?;
    file.circle.validate()?;
    let engine: EngineKind = file.engine.parse().map_err(|e| field("engine", e))?;
    let shots: Shots = file.shots.parse().map_err(|e| field("shots", e))?;
    if !file.bias.is_finite() {
        return Err(field("bias", "must be finite"));
    }
    if file.labels.len() != expected {
        return Err(field("labels", format!("expected {expected} labels, found {}", file.labels.len())));
    }
    if let Some(bad) = file.labels.iter().find(|&&l| Label::from_i8(l).is_none()) {
        return Err(field("labels", format!("label {bad} is not +1 or -1")));
    }
    Ok(ModelSpec { grid: file.grid, circle: file.circle, engine, shots, seed: file.seed, bias: file.bias })
}

/// Parses a model file and rebuilds the trained model.
pub fn load(text: &str) -> Result<(ModelSpec, TrainedModel), ModelFileError> {
    let file: ModelFile = serde_json::from_str(text)?;
    let spec = validate(&file)?;
    let samples = training_set(&spec.grid, &spec.circle)?;
    for (i, (s, &l)) in samples.iter().zip(&file.labels).enumerate() {
        if s.label.as_i8() != l {
            return Err(field("labels", format!("label {i} disagrees with the circle")));
        }
    }
    let model = TrainedModel::with_bias(samples, spec.bias, spec.kernel_engine())?;
    Ok((spec, model))
}

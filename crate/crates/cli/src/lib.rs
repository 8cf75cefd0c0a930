//! `qkernel` command-line harness: train on the grid, evaluate on random
//! points, and run the invariant check suites.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qkernel::blocks::{block_gate_sequence, block_matrix, BlockSlot};
use qkernel::dataset::{label_point, random_points, CircleSpec, GridSpec};
use qkernel::encoder::{contract_residual, synthesize, SynthesisMode, TargetVec};
use qkernel::kernel::{feature_map, kernel_value, EngineKind, KernelEngine, Label, Point2};
use qkernel::model_file::{self, ModelFileError, ModelSpec};
use qkernel::qip::{inner_product_sq, ReadoutMode, Shots};
use qkernel::statevec::Unitary4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_MODEL_PATH: &str = "qkernel-model.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "qkernel", version, about = "Quantum inner-product kernel classifier on a circle dataset")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the offset on the labelled grid and write a model file.
    Train(TrainArgs),
    /// Classify seeded random points with a saved model and print a JSON report.
    Eval(EvalArgs),
    /// Run the circuit invariant suites.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 0.04)]
    pub spacing: f64,
    #[arg(long, default_value_t = 0.54, allow_negative_numbers = true)]
    pub half_side: f64,
    #[arg(long, default_value_t = 0.42, allow_negative_numbers = true)]
    pub radius: f64,
    #[arg(long, default_value = "direct")]
    pub engine: EngineKind,
    #[arg(long, default_value = "exact")]
    pub shots: Shots,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = DEFAULT_MODEL_PATH)]
    pub model_path: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = DEFAULT_MODEL_PATH)]
    pub model_path: PathBuf,
    /// Overrides the engine stored in the model.
    #[arg(long)]
    pub engine: Option<EngineKind>,
    /// Overrides the shot count stored in the model.
    #[arg(long)]
    pub shots: Option<Shots>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    /// Per-point CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub bias: f64,
    pub n_train: usize,
    pub engine: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub bias: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub interior_accuracy: f64,
    pub exterior_accuracy: f64,
    pub engine: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: Point2,
    pub ideal: Label,
    pub predicted: Label,
    pub decision_value: f64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let report = cmd_train(&args)?;
            print_json(out, &report)
        }
        Command::Eval(args) => {
            let (report, _) = cmd_eval(&args)?;
            print_json(out, &report)
        }
        Command::Check(args) => {
            let outcomes = run_suites(&default_suites(), args.trials, args.seed);
            write_check_report(out, &outcomes)?;
            if outcomes.iter().all(SuiteOutcome::passed) {
                Ok(())
            } else {
                Err(CliError::Validation("check failed".into()))
            }
        }
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainReport, CliError> {
    let start = Instant::now();
    let grid = GridSpec { half_side: args.half_side, spacing: args.spacing };
    let circle = CircleSpec { radius: args.radius, ..CircleSpec::default() };
    let samples = model_file::training_set(&grid, &circle).map_err(validation)?;
    let engine = args.engine.with_shots(args.shots, args.seed);
    let model = qkernel::TrainedModel::train(samples, engine).map_err(validation)?;
    let spec = ModelSpec {
        grid,
        circle,
        engine: args.engine,
        shots: args.shots,
        seed: args.seed,
        bias: model.bias(),
    };
    let text = model_file::to_json(&spec, model.samples());
    fs::write(&args.model_path, text).map_err(|e| io_error(&args.model_path, e))?;
    Ok(TrainReport {
        bias: model.bias(),
        n_train: model.samples().len(),
        engine: args.engine.to_string(),
        seed: args.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn fraction(correct: usize, total: usize) -> f64 {
    // A class with no test points counts as fully correct.
    if total == 0 {
        1.0
    } else {
        correct as f64 / total as f64
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(ExperimentReport, Vec<PointResult>), CliError> {
    let start = Instant::now();
    if args.n_test == 0 {
        return Err(CliError::Validation("--n-test must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.model_path).map_err(|e| io_error(&args.model_path, e))?;
    let (mut spec, mut model) = model_file::load(&text).map_err(model_error)?;
    let rebuild = args.engine.is_some() || args.shots.is_some();
    if let Some(engine) = args.engine {
        spec.engine = engine;
    }
    if let Some(shots) = args.shots {
        spec.shots = shots;
    }
    if rebuild {
        model = qkernel::TrainedModel::with_bias(model.samples().to_vec(), spec.bias, spec.kernel_engine())
            .map_err(validation)?;
    }

    let points = random_points(args.n_test, args.seed, &spec.grid).map_err(validation)?;
    let results: Vec<PointResult> = points
        .par_iter()
        .map(|p| {
            let decision_value = model.decision_value(p).map_err(validation)?;
            Ok(PointResult {
                point: *p,
                ideal: label_point(p, &spec.circle),
                predicted: Label::from_decision(decision_value),
                decision_value,
            })
        })
        .collect::<Result<_, CliError>>()?;

    if let Some(path) = &args.out {
        write_csv(path, &results)?;
    }

    let tally = |class: Option<Label>| {
        let members = results.iter().filter(|r| class.is_none_or(|c| r.ideal == c));
        let (total, correct) = members.fold((0, 0), |(t, c), r| (t + 1, c + usize::from(r.ideal == r.predicted)));
        fraction(correct, total)
    };
    let report = ExperimentReport {
        bias: model.bias(),
        n_train: model.samples().len(),
        n_test: results.len(),
        accuracy: tally(None),
        interior_accuracy: tally(Some(Label::Negative)),
        exterior_accuracy: tally(Some(Label::Positive)),
        engine: spec.engine.to_string(),
        seed: args.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, results))
}

fn model_error(e: ModelFileError) -> CliError {
    match e {
        ModelFileError::Syntax(_) => CliError::Io(e.to_string()),
        other => validation(other),
    }
}

pub const CSV_HEADER: [&str; 5] = ["x", "y", "ideal_label", "predicted_label", "decision_value"];

pub fn write_csv(path: &Path, results: &[PointResult]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| io_error(path, e))?;
    for r in results {
        w.write_record([
            r.point.x.to_string(),
            r.point.y.to_string(),
            r.ideal.as_i8().to_string(),
            r.predicted.as_i8().to_string(),
            r.decision_value.to_string(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

type Trial = dyn Fn(&mut ChaCha8Rng) -> Result<f64, String> + Send + Sync;

/// One invariant: each trial returns a residual that must stay below `tolerance`.
pub struct Suite {
    pub name: &'static str,
    pub tolerance: f64,
    pub trial: Box<Trial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub tolerance: f64,
    pub trials: usize,
    pub max_residual: f64,
    pub error: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.max_residual < self.tolerance
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> TargetVec {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            return TargetVec::normalized(v).expect("non-zero");
        }
    }
}

fn gate_product(slot: BlockSlot, angle: f64) -> Result<Unitary4, String> {
    let gates = block_gate_sequence(slot, angle).map_err(|e| e.to_string())?;
    gates.iter().try_fold(Unitary4::identity(), |acc, g| {
        g.to_unitary4().map(|u| u * acc).map_err(|e| e.to_string())
    })
}

pub fn default_suites() -> Vec<Suite> {
    vec![
        Suite {
            name: "encoder",
            tolerance: 1e-10,
            trial: Box::new(|rng| {
                let v = random_unit(rng);
                let mut worst = 0.0f64;
                for mode in [SynthesisMode::Prepare, SynthesisMode::Unprepare] {
                    let s = synthesize(&v, mode).map_err(|e| e.to_string())?;
                    worst = worst
                        .max(contract_residual(&v, &s.operator, mode))
                        .max(s.operator.unitarity_deviation());
                }
                Ok(worst)
            }),
        },
        Suite {
            name: "blocks",
            tolerance: 1e-12,
            trial: Box::new(|rng| {
                let slot = BlockSlot::new(rng.random_range(0..3)).expect("slot in range");
                let angle = rng.random_range(-2.0 * std::f64::consts::PI..=2.0 * std::f64::consts::PI);
                Ok(gate_product(slot, angle)?.max_abs_diff(&block_matrix(slot, angle)))
            }),
        },
        Suite {
            name: "readout-modes",
            tolerance: 1e-12,
            trial: Box::new(|rng| {
                let (v, w) = (random_unit(rng), random_unit(rng));
                let direct = inner_product_sq(&v, &w, ReadoutMode::Direct).map_err(|e| e.to_string())?;
                let ancilla = inner_product_sq(&v, &w, ReadoutMode::Ancilla).map_err(|e| e.to_string())?;
                Ok((direct - ancilla).abs())
            }),
        },
        Suite {
            name: "oracle",
            tolerance: 1e-9,
            trial: Box::new(|rng| {
                let h = GridSpec::default().half_side;
                let mut point = || Point2::new(rng.random_range(-h..=h), rng.random_range(-h..=h));
                let (p, q) = (point(), point());
                let engine = KernelEngine::exact(ReadoutMode::Direct);
                let quantum = kernel_value(&p, &q, &engine).map_err(|e| e.to_string())?;
                let fp = feature_map(&p).map_err(|e| e.to_string())?;
                let fq = feature_map(&q).map_err(|e| e.to_string())?;
                Ok((quantum - qkernel_oracle::classical_inner_sq(fp.components(), fq.components())).abs())
            }),
        },
    ]
}

/// Runs every suite with its own seeded stream derived from `seed`.
pub fn run_suites(suites: &[Suite], trials: usize, seed: u64) -> Vec<SuiteOutcome> {
    suites
        .iter()
        .enumerate()
        .map(|(i, suite)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut outcome = SuiteOutcome {
                name: suite.name,
                tolerance: suite.tolerance,
                trials,
                max_residual: 0.0,
                error: None,
            };
            for _ in 0..trials {
                match (suite.trial)(&mut rng) {
                    Ok(r) if r.is_nan() => outcome.max_residual = f64::INFINITY,
                    Ok(r) => outcome.max_residual = outcome.max_residual.max(r),
                    Err(e) => {
                        outcome.error = Some(e);
                        break;
                    }
                }
            }
            outcome
        })
        .collect()
}

pub fn write_check_report(out: &mut dyn Write, outcomes: &[SuiteOutcome]) -> Result<(), CliError> {
    for o in outcomes {
        let status = if o.passed() { "ok" } else { "FAIL" };
        let line = match &o.error {
            Some(e) => format!("{:<14} {status}  error: {e}", o.name),
            None => format!(
                "{:<14} {status}  trials={} max_residual={:.3e} tolerance={:.0e}",
                o.name, o.trials, o.max_residual, o.tolerance
            ),
        };
        writeln!(out, "{line}").map_err(|e| CliError::Io(format!("stdout: {e}")))?;
    }
    Ok(())
}

//! Two-qubit amplitude-encoding circuits and the kernel classifier built on them.
//!
//! A real unit vector in R^4 is loaded into a two-qubit register by a chain of
//! three rotation blocks. Running the preparation of one vector followed by
//! the un-preparation of another leaves their squared overlap on the `|11>`
//! readout, which is the kernel used by [`kernel::TrainedModel`].

pub mod blocks;
pub mod dataset;
pub mod encoder;
pub mod kernel;
pub mod model_file;
pub mod qip;
pub mod statevec;

pub use blocks::{block_matrix, AngleTriple, BlockSlot};
pub use dataset::{generate_grid, label_point, random_points, CircleSpec, GridSpec};
pub use encoder::{build_ua, build_ub, BlockOrdering, TargetVec};
pub use kernel::{feature_map, kernel_value, EngineKind, KernelEngine, Label, LabeledSample, Point2, TrainedModel};
pub use qip::{inner_product_sq, ReadoutMode, ShotConfig, Shots};
pub use statevec::{StateVector, Unitary4};

//! Training grid, circle labels and seeded test points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{Label, Point2};

/// Largest number of grid values per axis accepted.
pub const MAX_GRID_STEPS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid circle: {0}")]
    InvalidCircle(String),
    #[error("point count must be at least 1")]
    EmptyCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_side: f64,
    pub spacing: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_side: 0.54, spacing: 0.04 }
    }
}

impl GridSpec {
    /// Number of intervals per axis, `2 * half_side / spacing`.
    pub fn intervals(&self) -> Result<usize, DatasetError> {
        if !(self.half_side.is_finite() && self.half_side > 0.0) {
            return Err(DatasetError::InvalidGrid(format!("half side {} must be positive", self.half_side)));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(DatasetError::InvalidGrid(format!("spacing {} must be positive", self.spacing)));
        }
        let ratio = 2.0 * self.half_side / self.spacing;
        let n = ratio.round();
        if !(n >= 1.0 && n <= MAX_GRID_STEPS as f64) {
            return Err(DatasetError::InvalidGrid(format!("{ratio} intervals per axis is out of range")));
        }
        if (ratio - n).abs() > 1e-9 {
            return Err(DatasetError::InvalidGrid(format!(
                "spacing {} does not divide side {}",
                self.spacing,
                2.0 * self.half_side
            )));
        }
        Ok(n as usize)
    }

    pub fn point_count(&self) -> Result<usize, DatasetError> {
        let n = self.intervals()? + 1;
        Ok(n * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub radius: f64,
    pub center: Point2,
}

impl Default for CircleSpec {
    fn default() -> Self {
        Self { radius: 0.42, center: Point2::new(0.0, 0.0) }
    }
}

impl CircleSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(DatasetError::InvalidCircle(format!("radius {} must be non-negative", self.radius)));
        }
        if !(self.center.x.is_finite() && self.center.y.is_finite()) {
            return Err(DatasetError::InvalidCircle("center must be finite".into()));
        }
        Ok(())
    }
}

/// Square grid with both edges included: `(n + 1)^2` points for `n` intervals.
///
/// Coordinates are `half_side * (2k - n) / n`, which is exactly antisymmetric
/// in `k`. Points are ordered by `y` then `x`.
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<Point2>, DatasetError> {
    let n = spec.intervals()?;
    let coord = |k: usize| spec.half_side * (2.0 * k as f64 - n as f64) / n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            points.push(Point2::new(coord(i), coord(j)));
        }
    }
    Ok(points)
}

/// `Negative` strictly inside the circle, `Positive` on or outside it.
pub fn label_point(p: &Point2, circle: &CircleSpec) -> Label {
    let dx = p.x - circle.center.x;
    let dy = p.y - circle.center.y;
    if dx * dx + dy * dy < circle.radius * circle.radius {
        Label::Negative
    } else {
        Label::Positive
    }
}

/// `count` points uniform on the grid's square, from a ChaCha8 stream seeded with `seed`.
pub fn random_points(count: usize, seed: u64, spec: &GridSpec) -> Result<Vec<Point2>, DatasetError> {
    if count == 0 {
        return Err(DatasetError::EmptyCount);
    }
    spec.intervals()?;
    let h = spec.half_side;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x = rng.random_range(-h..=h);
            let y = rng.random_range(-h..=h);
            Point2::new(x, y)
        })
        .collect())
}

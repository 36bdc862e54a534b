use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CostMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GridMetric {
    #[default]
    SquaredEuclidean,
    Euclidean,
}

/// A `height × width` pixel grid flattened row-major.
///
/// Pixel centres are spread evenly over `[0, side]` along each axis, so the
/// default `side = 1` is the unit square and `side = height − 1` gives pixel
/// units on a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub metric: GridMetric,
    pub side: f64,
}

impl GridSpec {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!("grid {height}x{width} is empty")));
        }
        Ok(Self { height, width, metric: GridMetric::default(), side: 1.0 })
    }

    pub fn with_metric(mut self, metric: GridMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_side(mut self, side: f64) -> Self {
        self.side = side;
        self
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates `(y, x)` of flat index `i`.
    pub fn coordinates(&self, i: usize) -> (f64, f64) {
        let (r, c) = (i / self.width, i % self.width);
        let axis = |k: usize, len: usize| {
            if len > 1 {
                self.side * k as f64 / (len - 1) as f64
            } else {
                0.0
            }
        };
        (axis(r, self.height), axis(c, self.width))
    }
}

/// Pairwise pixel distances under `spec.metric`.
pub fn grid_cost(spec: &GridSpec) -> Result<CostMatrix> {
    let n = spec.len();
    if n == 0 {
        return Err(Error::Empty("grid"));
    }
    if !(spec.side > 0.0) || !spec.side.is_finite() {
        return Err(Error::InvalidParameter(format!("grid side must be positive, got {}", spec.side)));
    }
    let coords: Vec<(f64, f64)> = (0..n).map(|i| spec.coordinates(i)).collect();
    let entries = Array2::from_shape_fn((n, n), |(i, j)| {
        let (dy, dx) = (coords[i].0 - coords[j].0, coords[i].1 - coords[j].1);
        let sq = dy * dy + dx * dx;
        match spec.metric {
            GridMetric::SquaredEuclidean => sq,
            GridMetric::Euclidean => sq.sqrt(),
        }
    });
    CostMatrix::new(entries)
}

//! Validated value types shared by every solver.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs whose total mass deviates from 1 by at most this much are
/// renormalized; anything further off is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// Allowed deviation of a transport plan's total mass from 1.
pub const PLAN_MASS_TOL: f64 = 1e-10;

/// Entries at or below this magnitude count as exact zeros in entropy and
/// support checks.
pub const ZERO_MASS: f64 = 1e-300;

fn check_entries<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<f64> {
    let mut sum = 0.0;
    for (index, &value) in values.into_iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeEntry { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// A probability vector: a source or target marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    values: Vec<f64>,
    strict: bool,
}

impl Histogram {
    /// Validates and renormalizes `values`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("histogram"));
        }
        let sum = check_entries(&values)?;
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / sum).collect();
        let strict = values.iter().all(|&v| v > 0.0);
        Ok(Self { values, strict })
    }

    /// Normalizes arbitrary nonnegative weights (e.g. pixel intensities).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("histogram"));
        }
        let sum = check_entries(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("weights have zero total mass".into()));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("histogram"));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether every entry is strictly positive.
    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn require_strict(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            None => Ok(()),
            Some(i) => Err(Error::Domain(format!(
                "{what} requires a strictly positive histogram, entry {i} is zero"
            ))),
        }
    }
}

/// An n×m matrix of finite transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("cost matrix"));
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty("cost matrix"));
        }
        let m = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m} columns"),
                got: format!("{} columns", bad.len()),
            });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let entries = Array2::from_shape_vec((n, m), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(entries)
    }

    pub fn zeros(n: usize, m: usize) -> Result<Self> {
        Self::new(Array2::zeros((n, m)))
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.t().as_standard_layout().into_owned(),
        }
    }

    pub(crate) fn require_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.dim() != (n, m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{m}"),
                got: format!("{}x{}", self.nrows(), self.ncols()),
            });
        }
        Ok(())
    }
}

/// A nonnegative n×m matrix with unit total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
}

impl TransportPlan {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("transport plan"));
        }
        let sum = check_entries(entries.iter())?;
        if (sum - 1.0).abs() > PLAN_MASS_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m} columns"),
                got: "ragged rows".into(),
            });
        }
        let entries = Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(entries)
    }

    /// Wraps a solver iterate whose mass may still be off by the solver
    /// tolerance. Entries must be finite and nonnegative.
    pub(crate) fn from_iterate(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("transport plan"));
        }
        check_entries(entries.iter())?;
        Ok(Self { entries })
    }

    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        Self::new(Array2::from_elem((n, m), 1.0 / (n * m) as f64))
    }

    /// The independent coupling p⊗q.
    pub fn product(p: &Histogram, q: &Histogram) -> Self {
        let entries = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| {
            p.values()[i] * q.values()[j]
        });
        Self { entries }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    /// Row and column sums.
    pub fn marginals(&self) -> (Array1<f64>, Array1<f64>) {
        (
            self.entries.sum_axis(Axis(1)),
            self.entries.sum_axis(Axis(0)),
        )
    }

    /// Number of entries above [`ZERO_MASS`].
    pub fn nonzeros(&self) -> usize {
        self.entries.iter().filter(|&&v| v > ZERO_MASS).count()
    }
}

/// Inputs and weights of a barycenter problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterProblem {
    inputs: Vec<Histogram>,
    weights: Vec<f64>,
}

impl BarycenterProblem {
    pub fn new(inputs: Vec<Histogram>, weights: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("barycenter inputs"));
        }
        if inputs.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", inputs.len()),
                got: format!("{} weights", weights.len()),
            });
        }
        let n = inputs[0].len();
        if let Some(h) = inputs.iter().find(|h| h.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("histograms of length {n}"),
                got: format!("length {}", h.len()),
            });
        }
        let sum = check_entries(&weights)?;
        if let Some(i) = weights.iter().position(|&w| w <= 0.0) {
            return Err(Error::InvalidParameter(format!("weight {i} is not positive")));
        }
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { inputs, weights })
    }

    pub fn inputs(&self) -> &[Histogram] {
        &self.inputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Length of every input histogram.
    pub fn support_size(&self) -> usize {
        self.inputs[0].len()
    }
}

/// Iteration controls shared by the transport and barycenter solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stopping threshold on the L1 marginal errors.
    pub tol: f64,
    /// Entropic only: update potentials with log-sum-exp instead of scalings.
    pub log_domain: bool,
    /// Treat non-convergence as an error.
    pub strict: bool,
    /// Run row/column/input loops on the rayon pool when available.
    pub parallel: bool,
    /// Run exactly `max_iters` sweeps, ignoring `tol` for stopping.
    pub fixed_iterations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-9,
            log_domain: false,
            strict: false,
            parallel: true,
            fixed_iterations: false,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_log_domain(mut self, log_domain: bool) -> Self {
        self.log_domain = log_domain;
        self
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// Fixed-count mode: exactly `iters` sweeps.
    pub fn fixed(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self.fixed_iterations = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn histogram_renormalizes_small_drift() {
        let h = Histogram::new(vec![0.5, 0.5 + 5e-7]).unwrap();
        assert!((h.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(h.is_strict());
    }

    #[test]
    fn histogram_rejects_large_drift() {
        assert!(matches!(
            Histogram::new(vec![0.3, 0.3, 0.3]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn histogram_rejects_negative_and_nan() {
        assert!(matches!(
            Histogram::new(vec![1.5, -0.5]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(
            Histogram::new(vec![f64::NAN, 1.0]),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(Histogram::new(vec![]).is_err());
    }

    #[test]
    fn zero_entries_clear_strict_flag() {
        let h = Histogram::new(vec![1.0, 0.0]).unwrap();
        assert!(!h.is_strict());
        assert!(h.require_strict("test").is_err());
    }

    #[test]
    fn cost_rejects_infinite() {
        assert!(CostMatrix::new(array![[0.0, f64::INFINITY]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn plan_mass_checked() {
        assert!(TransportPlan::new(array![[0.5, 0.4]]).is_err());
        assert!(TransportPlan::new(array![[0.5, 0.5]]).is_ok());
    }

    #[test]
    fn barycenter_problem_validation() {
        let a = Histogram::uniform(3).unwrap();
        let b = Histogram::uniform(2).unwrap();
        assert!(BarycenterProblem::new(vec![a.clone(), b], vec![0.5, 0.5]).is_err());
        assert!(BarycenterProblem::new(vec![a.clone(), a.clone()], vec![1.0, 0.0]).is_err());
        assert!(BarycenterProblem::new(vec![a.clone()], vec![0.5, 0.5]).is_err());
        let p = BarycenterProblem::new(vec![a.clone(), a], vec![0.25, 0.75]).unwrap();
        assert_eq!(p.support_size(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default().with_tol(0.0).validate().is_err());
        assert!(SolverConfig::default().with_max_iters(0).validate().is_err());
    }
}

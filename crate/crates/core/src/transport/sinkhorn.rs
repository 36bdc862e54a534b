//! Classic Sinkhorn scaling on a Gibbs kernel.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::types::{CostMatrix, Histogram, SolverConfig};

/// The kernel `K = exp(−C/λ)` together with its transpose, so that both
/// `K v` and `Kᵀ u` walk contiguous rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsKernel {
    k: Array2<f64>,
    kt: Array2<f64>,
}

impl GibbsKernel {
    pub fn from_cost(cost: &CostMatrix, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        Self::new(cost.view().mapv(|c| (-c / lambda).exp()))
    }

    /// Wraps an explicit kernel. Entries must be finite and nonnegative;
    /// zeros are allowed here and surface as underflow errors in the solvers
    /// when they empty a whole row or column.
    pub fn new(k: Array2<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::Empty("kernel"));
        }
        if let Some(index) = k.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(index) = k.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeEntry { index, value: k.iter().nth(index).copied().unwrap_or(0.0) });
        }
        let kt = k.t().as_standard_layout().into_owned();
        Ok(Self { k, kt })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.k.dim()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.k.view()
    }

    /// `K v`.
    pub(crate) fn apply(&self, v: &Array1<f64>, parallel: bool) -> Array1<f64> {
        Array1::from(map_indices(self.k.nrows(), parallel, |i| self.k.row(i).dot(v)))
    }

    /// `Kᵀ u`.
    pub(crate) fn apply_t(&self, u: &Array1<f64>, parallel: bool) -> Array1<f64> {
        Array1::from(map_indices(self.kt.nrows(), parallel, |j| self.kt.row(j).dot(u)))
    }

    /// `K v` for every `v` in `vs`, reading each row of `K` once.
    pub(crate) fn apply_many(&self, vs: &[Array1<f64>], parallel: bool) -> Vec<Array1<f64>> {
        batched(&self.k, vs, parallel)
    }

    /// `Kᵀ u` for every `u` in `us`.
    pub(crate) fn apply_t_many(&self, us: &[Array1<f64>], parallel: bool) -> Vec<Array1<f64>> {
        batched(&self.kt, us, parallel)
    }

    /// `diag(u) K diag(v)`.
    pub fn scaled_plan(&self, u: &Array1<f64>, v: &Array1<f64>) -> Array2<f64> {
        let mut p = self.k.clone();
        for ((i, j), x) in p.indexed_iter_mut() {
            *x *= u[i] * v[j];
        }
        p
    }
}

fn batched(m: &Array2<f64>, xs: &[Array1<f64>], parallel: bool) -> Vec<Array1<f64>> {
    let rows = map_indices(m.nrows(), parallel, |i| {
        let row = m.row(i);
        xs.iter().map(|x| row.dot(x)).collect::<Vec<f64>>()
    });
    (0..xs.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
}

/// Marginal errors after one scaling sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRecord {
    pub iter: usize,
    pub row_err: f64,
    pub col_err: f64,
}

/// Divides `num` by `den` entrywise, failing on a vanished denominator.
///
/// Zero numerators give zero scalings regardless of the denominator.
pub(crate) fn checked_ratio(num: &[f64], den: &Array1<f64>, axis: &'static str) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(num.len());
    for (index, (&a, &b)) in num.iter().zip(den.iter()).enumerate() {
        if a == 0.0 {
            continue;
        }
        let r = a / b;
        if !(b > 0.0) || !r.is_finite() {
            return Err(Error::Underflow { axis, index });
        }
        out[index] = r;
    }
    Ok(out)
}

/// Sinkhorn iterate `(u, v)`, advanced one sweep at a time.
#[derive(Debug, Clone)]
pub struct SinkhornState<'a> {
    kernel: &'a GibbsKernel,
    p: &'a Histogram,
    q: &'a Histogram,
    u: Array1<f64>,
    v: Array1<f64>,
    kv: Array1<f64>,
    ktu: Array1<f64>,
    parallel: bool,
    iterations: usize,
}

impl<'a> SinkhornState<'a> {
    /// Starts from `v = 1`.
    pub fn new(kernel: &'a GibbsKernel, p: &'a Histogram, q: &'a Histogram, parallel: bool) -> Result<Self> {
        let (n, m) = kernel.dim();
        if p.len() != n || q.len() != m {
            return Err(Error::DimensionMismatch {
                expected: format!("marginals of lengths {n} and {m}"),
                got: format!("{} and {}", p.len(), q.len()),
            });
        }
        p.require_strict("Sinkhorn scaling")?;
        q.require_strict("Sinkhorn scaling")?;
        let v = Array1::ones(m);
        let kv = kernel.apply(&v, parallel);
        Ok(Self {
            kernel,
            p,
            q,
            u: Array1::ones(n),
            v,
            kv,
            ktu: Array1::zeros(m),
            parallel,
            iterations: 0,
        })
    }

    /// `u ← p/(K v)`, then `v ← q/(Kᵀ u)`.
    pub fn step(&mut self) -> Result<()> {
        self.u = checked_ratio(self.p.values(), &self.kv, "row")?;
        self.ktu = self.kernel.apply_t(&self.u, self.parallel);
        self.v = checked_ratio(self.q.values(), &self.ktu, "column")?;
        self.kv = self.kernel.apply(&self.v, self.parallel);
        self.iterations += 1;
        Ok(())
    }

    pub fn u(&self) -> &Array1<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array1<f64> {
        &self.v
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// L1 marginal errors of `diag(u) K diag(v)`.
    pub fn errors(&self) -> (f64, f64) {
        let row: f64 = (0..self.u.len())
            .map(|i| (self.u[i] * self.kv[i] - self.p.values()[i]).abs())
            .sum();
        let col: f64 = (0..self.v.len())
            .map(|j| (self.v[j] * self.ktu[j] - self.q.values()[j]).abs())
            .sum();
        (row, col)
    }
}

/// Scalings and trace of a classic Sinkhorn run.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub trace: Vec<ScalingRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl SinkhornOutput {
    /// The plan `P_ij = u_i K_ij v_j`.
    pub fn plan(&self, kernel: &GibbsKernel) -> Array2<f64> {
        kernel.scaled_plan(&self.u, &self.v)
    }
}

/// Alternating diagonal scaling of `K` until the L1 marginal errors drop to
/// `cfg.tol`.
pub fn classic_sinkhorn(
    kernel: &GibbsKernel,
    p: &Histogram,
    q: &Histogram,
    cfg: &SolverConfig,
) -> Result<SinkhornOutput> {
    cfg.validate()?;
    let mut state = SinkhornState::new(kernel, p, q, cfg.parallel)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        state.step()?;
        let (row_err, col_err) = state.errors();
        trace.push(ScalingRecord { iter: state.iterations(), row_err, col_err });
        converged = row_err.max(col_err) <= cfg.tol;
        if converged && !cfg.fixed_iterations {
            break;
        }
    }
    if cfg.strict && !converged {
        let residual = trace.last().map_or(f64::INFINITY, |r| r.row_err.max(r.col_err));
        return Err(Error::NotConverged { iterations: state.iterations(), residual });
    }
    Ok(SinkhornOutput {
        u: state.u,
        v: state.v,
        trace,
        converged,
        iterations: state.iterations,
    })
}

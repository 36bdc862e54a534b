//! Regularized barycenters.
//!
//! Minimizes `Σ_k r_k φ(p^k, q)` over `q`, where `φ` is the regularized
//! transport cost. [`generalized_barycenter`] keeps one pair of potentials
//! `(α^k, β^k)` per input and sweeps
//!
//! 1. a row projection of every `(α^k, β^k)` against its input `p^k`
//!    (independent across `k`);
//! 2. for `k = 1, …, N−1` in order, a pair solve on every column that makes
//!    the column masses of plans `k` and `k+1` agree while keeping
//!    `Σ_l r_l β^l = 0`.
//!
//! [`entropic_barycenter`] is the scaling iteration specific to the entropic
//! regularizer.

mod entropic;
pub mod pair_solve;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::try_map_indices;
use crate::regularizer::{plan_with, DualPotentials, Regularizer, RegularizerSpec};
use crate::scalar::contiguous;
use crate::transport::project_lines;
use crate::types::{BarycenterProblem, CostMatrix, Histogram, SolverConfig};

pub use entropic::{entropic_barycenter, EntropicBarycenterOutput};
pub use pair_solve::{
    entropic_pair_solve, quadratic_pair_solve, tsallis_pair_solve, PairInput, PairSolution,
};

/// Diagnostics of one barycenter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarycenterRecord {
    pub iter: usize,
    /// `‖r(P^k) − p^k‖₁` for every input.
    pub row_errs: Vec<f64>,
    /// `max_{k,j} |c(P^k)_j − c(P^1)_j|`.
    pub consensus_err: f64,
    /// `max_j |Σ_k r_k β^k_j|`.
    pub beta_residual: f64,
    /// Pair solves that fell back to bisection in this sweep.
    pub fallbacks: usize,
}

impl BarycenterRecord {
    /// Largest of the row errors and the consensus error.
    pub fn residual(&self) -> f64 {
        self.row_errs.iter().copied().fold(self.consensus_err, f64::max)
    }
}

/// Per-input potentials and the sweep history.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterState {
    pub potentials: Vec<DualPotentials>,
    pub trace: Vec<BarycenterRecord>,
}

/// Output of [`generalized_barycenter`].
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterOutput {
    /// Weighted average of the plans' column marginals, renormalized.
    pub barycenter: Histogram,
    pub potentials: Vec<DualPotentials>,
    pub trace: Vec<BarycenterRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// `Σ_k r_k Φ̃(P^k)` at the final potentials.
    pub value: f64,
}

/// The barycenter sweep as a step-able state machine.
pub struct BarycenterSolver<'a> {
    reg: Box<dyn Regularizer>,
    cost: &'a CostMatrix,
    cost_t: Array2<f64>,
    problem: &'a BarycenterProblem,
    cfg: SolverConfig,
    state: BarycenterState,
    iterations: usize,
    fallbacks: usize,
}

const MARGINAL_CHUNK: usize = 16;

/// Row and column sums of `A(α, β)` without storing the plan.
pub(crate) fn plan_marginals(
    reg: &dyn Regularizer,
    cost: ArrayView2<'_, f64>,
    alpha: ArrayView1<'_, f64>,
    beta: ArrayView1<'_, f64>,
    parallel: bool,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (n, m) = cost.dim();
    let beta = contiguous(&beta);
    let parts = try_map_indices(n.div_ceil(MARGINAL_CHUNK), parallel, |c| {
        let start = c * MARGINAL_CHUNK;
        let end = (start + MARGINAL_CHUNK).min(n);
        let mut rows = Vec::with_capacity(end - start);
        let mut cols = vec![0.0; m];
        let mut buf = Vec::with_capacity(m);
        for i in start..end {
            let crow = cost.row(i);
            let rs = reg.accumulate_row(alpha[i], &beta, &contiguous(&crow), &mut buf, &mut cols)?;
            rows.push(rs);
        }
        Ok((rows, cols))
    })?;
    let mut rows = Vec::with_capacity(n);
    let mut cols = Array1::zeros(m);
    for (r, c) in parts {
        rows.extend(r);
        for (acc, v) in cols.iter_mut().zip(c) {
            *acc += v;
        }
    }
    Ok((Array1::from(rows), cols))
}

impl<'a> BarycenterSolver<'a> {
    pub fn new(
        spec: &RegularizerSpec,
        cost: &'a CostMatrix,
        problem: &'a BarycenterProblem,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = problem.support_size();
        cost.require_dims(n, n)?;
        if let RegularizerSpec::Tsallis { q, .. } = spec {
            if *q < 1.0 {
                for h in problem.inputs() {
                    h.require_strict("Tsallis index below 1")?;
                }
            }
        }
        Ok(Self {
            reg: spec.build()?,
            cost,
            cost_t: cost.entries().t().as_standard_layout().into_owned(),
            problem,
            cfg: *cfg,
            state: BarycenterState {
                potentials: vec![DualPotentials::zeros(n, n); problem.len()],
                trace: Vec::new(),
            },
            iterations: 0,
            fallbacks: 0,
        })
    }

    /// One full sweep: all row projections, then the pair solves in order.
    pub fn step(&mut self) -> Result<()> {
        let reg = self.reg.as_ref();
        let cfg = self.cfg;
        let pots = &self.state.potentials;
        let alphas = try_map_indices(self.problem.len(), cfg.parallel, |k| {
            project_lines(
                reg,
                self.cost.view(),
                pots[k].beta.view(),
                self.problem.inputs()[k].values(),
                cfg.log_domain,
                cfg.parallel,
                "row",
            )
            .map(|(a, _)| a)
        })?;
        for (pot, a) in self.state.potentials.iter_mut().zip(alphas) {
            pot.alpha = a;
        }
        let w = self.problem.weights();
        let n = self.problem.support_size();
        let mut fallbacks = 0;
        for k in 0..self.problem.len().saturating_sub(1) {
            let pots = &self.state.potentials;
            let sols = try_map_indices(n, cfg.parallel, |j| {
                let sigma: f64 = -(0..pots.len())
                    .filter(|&l| l != k && l != k + 1)
                    .map(|l| w[l] * pots[l].beta[j])
                    .sum::<f64>();
                reg.solve_pair(&PairInput {
                    alpha1: pots[k].alpha.view(),
                    alpha2: pots[k + 1].alpha.view(),
                    costs: self.cost_t.row(j),
                    sigma,
                    r1: w[k],
                    r2: w[k + 1],
                })
            })?;
            for (j, s) in sols.into_iter().enumerate() {
                self.state.potentials[k].beta[j] = s.beta1;
                self.state.potentials[k + 1].beta[j] = s.beta2;
                fallbacks += usize::from(s.fallback);
            }
        }
        self.fallbacks = fallbacks;
        self.iterations += 1;
        Ok(())
    }

    pub fn potentials(&self) -> &[DualPotentials] {
        &self.state.potentials
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Plan `k` at the current potentials.
    pub fn plan(&self, k: usize) -> Result<Array2<f64>> {
        plan_with(self.reg.as_ref(), self.cost, &self.state.potentials[k])
    }

    /// Column marginals of all plans and the diagnostics of the current state.
    pub fn measure(&self) -> Result<(Vec<Array1<f64>>, BarycenterRecord)> {
        let mut row_errs = Vec::with_capacity(self.problem.len());
        let mut cols = Vec::with_capacity(self.problem.len());
        for (k, pot) in self.state.potentials.iter().enumerate() {
            let (r, c) = plan_marginals(
                self.reg.as_ref(),
                self.cost.view(),
                pot.alpha.view(),
                pot.beta.view(),
                self.cfg.parallel,
            )?;
            let p = self.problem.inputs()[k].values();
            row_errs.push(r.iter().zip(p).map(|(a, b)| (a - b).abs()).sum());
            cols.push(c);
        }
        let mut consensus: f64 = 0.0;
        for c in &cols[1..] {
            for (a, b) in c.iter().zip(cols[0].iter()) {
                consensus = consensus.max((a - b).abs());
            }
        }
        let w = self.problem.weights();
        let n = self.problem.support_size();
        let beta_residual = (0..n)
            .map(|j| {
                self.state
                    .potentials
                    .iter()
                    .zip(w)
                    .map(|(p, r)| r * p.beta[j])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        let record = BarycenterRecord {
            iter: self.iterations,
            row_errs,
            consensus_err: consensus,
            beta_residual,
            fallbacks: self.fallbacks,
        };
        Ok((cols, record))
    }

    pub fn into_state(self) -> BarycenterState {
        self.state
    }
}

/// Barycenter by the split sweep described in the module docs, from all
/// potentials at zero.
pub fn generalized_barycenter(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    problem: &BarycenterProblem,
    cfg: &SolverConfig,
) -> Result<BarycenterOutput> {
    let mut solver = BarycenterSolver::new(reg, cost, problem, cfg)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut cols = Vec::new();
    for _ in 0..cfg.max_iters {
        solver.step()?;
        let (c, rec) = solver.measure()?;
        converged = rec.residual() <= cfg.tol;
        trace.push(rec);
        cols = c;
        if converged && !cfg.fixed_iterations {
            break;
        }
    }
    if cfg.strict && !converged {
        let residual = trace.last().map_or(f64::INFINITY, BarycenterRecord::residual);
        return Err(Error::NotConverged { iterations: solver.iterations(), residual });
    }
    let n = problem.support_size();
    let mut avg = vec![0.0; n];
    for (c, r) in cols.iter().zip(problem.weights()) {
        for (a, v) in avg.iter_mut().zip(c.iter()) {
            *a += r * v;
        }
    }
    let mut value = 0.0;
    for (k, r) in problem.weights().iter().enumerate() {
        let plan = solver.plan(k)?;
        let linear: f64 = plan.iter().zip(cost.view().iter()).map(|(a, c)| a * c).sum();
        value += r * (linear + solver.reg.term(plan.view())?);
    }
    let iterations = solver.iterations();
    let state = solver.into_state();
    Ok(BarycenterOutput {
        barycenter: Histogram::from_weights(avg)?,
        potentials: state.potentials,
        trace,
        converged,
        iterations,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_input_quadratic_zero_cost_is_uniform() {
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let c = CostMatrix::zeros(2, 2).unwrap();
        let p = Histogram::new(vec![0.8, 0.2]).unwrap();
        let prob = BarycenterProblem::new(vec![p], vec![1.0]).unwrap();
        let out = generalized_barycenter(&reg, &c, &prob, &SolverConfig::default()).unwrap();
        assert!(out.converged);
        for v in out.barycenter.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_sweep_keeps_weighted_beta_sum() {
        let reg = RegularizerSpec::quadratic(0.5).unwrap();
        let c = CostMatrix::new(array![[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]]).unwrap();
        let inputs = vec![
            Histogram::new(vec![0.6, 0.3, 0.1]).unwrap(),
            Histogram::new(vec![0.1, 0.2, 0.7]).unwrap(),
            Histogram::new(vec![0.3, 0.4, 0.3]).unwrap(),
        ];
        let prob = BarycenterProblem::new(inputs, vec![0.2, 0.5, 0.3]).unwrap();
        let mut s = BarycenterSolver::new(&reg, &c, &prob, &SolverConfig::default()).unwrap();
        for _ in 0..5 {
            s.step().unwrap();
            let (_, rec) = s.measure().unwrap();
            assert!(rec.beta_residual < 1e-12, "{}", rec.beta_residual);
        }
    }

    #[test]
    fn rejects_rectangular_cost() {
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let c = CostMatrix::zeros(2, 3).unwrap();
        let prob = BarycenterProblem::new(vec![Histogram::uniform(2).unwrap()], vec![1.0]).unwrap();
        assert!(generalized_barycenter(&reg, &c, &prob, &SolverConfig::default()).is_err());
    }
}

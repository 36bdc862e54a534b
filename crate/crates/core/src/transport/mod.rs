//! Pairwise transport solvers.
//!
//! [`solve_transport`] alternates the row projection (solve the row sums of
//! `A(α, β)` for `α` with `β` fixed) and the column projection (the same for
//! `β`), starting from `α = β = 0`. With the entropic regularizer in plain
//! mode this is exactly Sinkhorn scaling in logarithmic coordinates
//! `α = λ log u`, `β = λ log v`; [`classic_sinkhorn`] is the multiplicative
//! reference implementation.

pub mod row_solve;
mod sinkhorn;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::round_to_marginals;
use crate::parallel::try_map_indices;
use crate::regularizer::{plan_with, theta_residual_with, DualPotentials, Regularizer, RegularizerSpec};
use crate::types::{CostMatrix, Histogram, SolverConfig, TransportPlan};

pub use row_solve::{quadratic_row_solve, tsallis_row_solve, QuadraticRowSolution};
pub(crate) use sinkhorn::checked_ratio;
pub use sinkhorn::{classic_sinkhorn, GibbsKernel, ScalingRecord, SinkhornOutput, SinkhornState};

/// Diagnostics recorded after every sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// `‖r(P) − p‖₁` of the current iterate.
    pub row_err: f64,
    /// `‖c(P) − q‖₁` of the current iterate.
    pub col_err: f64,
    /// Objective at the iterate rounded onto Π(p, q).
    pub primal: f64,
    /// `⟨p, α⟩ + ⟨q, β⟩ − Φ̃*(α ⊕ β)`; absent for Tsallis.
    pub dual: Option<f64>,
    /// Optimality residual of the iterate (see [`crate::theta_residual`]).
    pub theta_res: f64,
    /// Largest active-set size at exit of the sort-based scans.
    #[serde(skip)]
    pub max_active: Option<usize>,
}

/// Output of [`solve_transport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// `A(α, β)` at the final potentials. Its mass is 1 only up to the
    /// reached tolerance.
    pub plan: TransportPlan,
    pub potentials: DualPotentials,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
}

fn relabel(e: Error, axis: &'static str, index: usize) -> Error {
    match e {
        Error::Underflow { .. } => Error::Underflow { axis, index },
        other => other,
    }
}

/// Solves every line (row of `lines`) against the fixed opposite potential.
pub(crate) fn project_lines(
    reg: &dyn Regularizer,
    lines: ArrayView2<'_, f64>,
    duals: ArrayView1<'_, f64>,
    targets: &[f64],
    log_domain: bool,
    parallel: bool,
    axis: &'static str,
) -> Result<(Array1<f64>, Option<usize>)> {
    let sols = try_map_indices(lines.nrows(), parallel, |i| {
        reg.solve_line(duals, lines.row(i), targets[i], log_domain)
            .map_err(|e| relabel(e, axis, i))
    })?;
    let active = sols.iter().filter_map(|s| s.active).max();
    Ok((sols.into_iter().map(|s| s.value).collect(), active))
}

fn check_problem(cost: &CostMatrix, p: &Histogram, q: &Histogram) -> Result<()> {
    cost.require_dims(p.len(), q.len())
}

fn check_pot(cost: &CostMatrix, pot: &DualPotentials) -> Result<()> {
    cost.require_dims(pot.alpha.len(), pot.beta.len())
}

/// New `α` making the row sums of `A(α, β)` equal to `p`.
pub fn row_projection(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    pot: &DualPotentials,
    p: &Histogram,
    cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    check_pot(cost, pot)?;
    if p.len() != cost.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", cost.nrows()),
            got: format!("{}", p.len()),
        });
    }
    let r = reg.build()?;
    project_lines(r.as_ref(), cost.view(), pot.beta.view(), p.values(), cfg.log_domain, cfg.parallel, "row")
        .map(|(a, _)| a)
}

/// New `β` making the column sums of `A(α, β)` equal to `q`: the row
/// projection of the transposed problem.
pub fn col_projection(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    pot: &DualPotentials,
    q: &Histogram,
    cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    check_pot(cost, pot)?;
    if q.len() != cost.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", cost.ncols()),
            got: format!("{}", q.len()),
        });
    }
    let r = reg.build()?;
    let ct = cost.entries().t().as_standard_layout().into_owned();
    project_lines(r.as_ref(), ct.view(), pot.alpha.view(), q.values(), cfg.log_domain, cfg.parallel, "column")
        .map(|(b, _)| b)
}

/// The alternating projection as a step-able state machine.
pub struct TransportSolver<'a> {
    spec: RegularizerSpec,
    reg: Box<dyn Regularizer>,
    cost: &'a CostMatrix,
    cost_t: Array2<f64>,
    p: &'a Histogram,
    q: &'a Histogram,
    cfg: SolverConfig,
    pot: DualPotentials,
    iterations: usize,
    max_active: Option<usize>,
}

impl<'a> TransportSolver<'a> {
    pub fn new(
        spec: &RegularizerSpec,
        cost: &'a CostMatrix,
        p: &'a Histogram,
        q: &'a Histogram,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_problem(cost, p, q)?;
        if !spec.allows_sparse_plans() {
            p.require_strict("this regularizer")?;
            q.require_strict("this regularizer")?;
        }
        Ok(Self {
            spec: *spec,
            reg: spec.build()?,
            cost,
            cost_t: cost.entries().t().as_standard_layout().into_owned(),
            p,
            q,
            cfg: *cfg,
            pot: DualPotentials::zeros(p.len(), q.len()),
            iterations: 0,
            max_active: None,
        })
    }

    /// One row projection followed by one column projection.
    pub fn step(&mut self) -> Result<()> {
        let (alpha, a1) = project_lines(
            self.reg.as_ref(),
            self.cost.view(),
            self.pot.beta.view(),
            self.p.values(),
            self.cfg.log_domain,
            self.cfg.parallel,
            "row",
        )?;
        self.pot.alpha = alpha;
        let (beta, a2) = project_lines(
            self.reg.as_ref(),
            self.cost_t.view(),
            self.pot.alpha.view(),
            self.q.values(),
            self.cfg.log_domain,
            self.cfg.parallel,
            "column",
        )?;
        self.pot.beta = beta;
        self.max_active = a1.max(a2);
        self.iterations += 1;
        Ok(())
    }

    pub fn potentials(&self) -> &DualPotentials {
        &self.pot
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `A(α, β)` at the current potentials.
    pub fn plan(&self) -> Result<Array2<f64>> {
        plan_with(self.reg.as_ref(), self.cost, &self.pot)
    }

    /// Diagnostics of the current iterate; `plan` must be [`Self::plan`].
    pub fn record(&self, plan: &Array2<f64>) -> Result<TraceRecord> {
        let rows = plan.sum_axis(Axis(1));
        let cols = plan.sum_axis(Axis(0));
        let row_err: f64 = rows.iter().zip(self.p.values()).map(|(a, b)| (a - b).abs()).sum();
        let col_err: f64 = cols.iter().zip(self.q.values()).map(|(a, b)| (a - b).abs()).sum();
        let rounded = round_to_marginals(plan.view(), self.p, self.q);
        let primal = linear(rounded.view(), self.cost.view()) + self.reg.term(rounded.view())?;
        let shifted = self.pot.outer_sum() - self.cost.view();
        let dual = self.reg.term_conjugate(shifted.view()).map(|conj| {
            self.pot.alpha.dot(&ArrayView1::from(self.p.values()))
                + self.pot.beta.dot(&ArrayView1::from(self.q.values()))
                - conj
        });
        let theta_res = theta_residual_with(self.reg.as_ref(), self.cost, plan.view(), true)?;
        Ok(TraceRecord {
            iter: self.iterations,
            row_err,
            col_err,
            primal,
            dual,
            theta_res,
            max_active: self.max_active,
        })
    }

    pub fn spec(&self) -> &RegularizerSpec {
        &self.spec
    }
}

fn linear(a: ArrayView2<'_, f64>, c: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(c.iter()).map(|(x, y)| x * y).sum()
}

/// Alternating dual projections from `α = β = 0` until
/// `max(row_err, col_err) ≤ cfg.tol` or `cfg.max_iters` sweeps.
pub fn solve_transport(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    p: &Histogram,
    q: &Histogram,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let mut solver = TransportSolver::new(reg, cost, p, q, cfg)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut plan = None;
    for _ in 0..cfg.max_iters {
        solver.step()?;
        let current = solver.plan()?;
        let rec = solver.record(&current)?;
        converged = rec.row_err.max(rec.col_err) <= cfg.tol;
        trace.push(rec);
        plan = Some(current);
        if converged && !cfg.fixed_iterations {
            break;
        }
    }
    if cfg.strict && !converged {
        let residual = trace.last().map_or(f64::INFINITY, |r| r.row_err.max(r.col_err));
        return Err(Error::NotConverged { iterations: solver.iterations(), residual });
    }
    let plan = match plan {
        Some(p) => TransportPlan::from_iterate(p)?,
        None => TransportPlan::from_iterate(solver.plan()?)?,
    };
    Ok(SolveResult {
        plan,
        potentials: solver.pot,
        trace,
        converged,
        iterations: solver.iterations,
    })
}

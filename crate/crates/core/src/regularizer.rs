//! Convex regularizers of the transport objective.
//!
//! Every regularizer is described by the regularizing part `R` of the
//! extended objective `Φ̃(A) = ⟨A, C⟩ + R(A)` on positive n×m matrices. From
//! `R` we get the gradient map `S(A) = C + ∇R(A)`, the conjugate
//! `Φ̃*(u) = R*(u − C)`, and the inverse of the gradient map, which turns a
//! dual score `s = α_i + β_j − C_ij` into a plan entry. The optimal plan of a
//! regularized problem is `A(α, β)` for the right pair of dual potentials.
//!
//! Three regularizers are built in:
//!
//! | kind | `R(A)` | plan entry from `s` |
//! |------|--------|---------------------|
//! | entropic | `λ(Σ A log A − Σ A + 1)` | `exp(s/λ)` |
//! | quadratic | `(λ/2) Σ A²` | `s⁺/λ` |
//! | Tsallis | `−λ T̃(A)` (1-homogeneous) | `((q̃−1)s/(λq̃))^{1/(q̃−1)}` |
//!
//! A fourth regularizer only needs a [`Regularizer`] impl.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::barycenter::pair_solve;
use crate::error::{Error, Result};
use crate::scalar::contiguous;
use crate::transport::row_solve;
use crate::types::{CostMatrix, TransportPlan, ZERO_MASS};

/// The behavior a regularizer must provide to the solvers.
pub trait Regularizer: Sync {
    /// Regularization strength λ.
    fn lambda(&self) -> f64;

    /// `R(A)`, the regularizing part of the potential.
    fn term(&self, a: ArrayView2<'_, f64>) -> Result<f64>;

    /// `∇R(A)`.
    fn term_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>>;

    /// `∇R(A)` where only the entries on the support of `A` are used.
    fn support_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.term_gradient(a)
    }

    /// `R*(v)`, or `None` when it cannot be evaluated.
    fn term_conjugate(&self, v: ArrayView2<'_, f64>) -> Option<f64>;

    /// Plan entry for the dual score `s = α_i + β_j − C_ij`.
    fn plan_entry(&self, score: f64) -> Result<f64>;

    /// Adds the plan row `a(alpha_i + β_j − C_ij)` to `cols` and returns
    /// its sum. `buf` is scratch space.
    fn accumulate_row(
        &self,
        alpha_i: f64,
        beta: &[f64],
        cost_row: &[f64],
        buf: &mut Vec<f64>,
        cols: &mut [f64],
    ) -> Result<f64> {
        buf.clear();
        buf.extend(beta.iter().zip(cost_row).map(|(b, c)| alpha_i + b - c));
        self.plan_entries(buf)?;
        let mut sum = 0.0;
        for (acc, &a) in cols.iter_mut().zip(buf.iter()) {
            sum += a;
            *acc += a;
        }
        Ok(sum)
    }

    /// [`Regularizer::plan_entry`] applied in place to a row of scores.
    fn plan_entries(&self, scores: &mut [f64]) -> Result<()> {
        for s in scores.iter_mut() {
            *s = self.plan_entry(*s)?;
        }
        Ok(())
    }

    /// Solves `Σ_k plan_entry(x + duals_k − costs_k) = target` for `x`.
    ///
    /// This is one row of the row projection (or one column of the column
    /// projection, with the roles of α and β swapped).
    fn solve_line(
        &self,
        duals: ArrayView1<'_, f64>,
        costs: ArrayView1<'_, f64>,
        target: f64,
        log_domain: bool,
    ) -> Result<LineSolve>;

    /// Solves the two-input consensus equation of the split barycenter step
    /// for one column: the column masses of inputs k and k+1 agree while
    /// `w_k b_k + w_{k+1} b_{k+1} = sigma`.
    fn solve_pair(&self, pair: &pair_solve::PairInput<'_>) -> Result<pair_solve::PairSolution>;

    /// Bregman divergence of `R` between two matrices in its domain.
    fn divergence(&self, p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64> {
        let grad = self.term_gradient(q)?;
        let mut lin = 0.0;
        Zip::from(&grad).and(&p).and(&q).for_each(|&g, &pv, &qv| lin += g * (pv - qv));
        Ok(self.term(p)? - self.term(q)? - lin)
    }
}

/// Result of a single line solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSolve {
    pub value: f64,
    /// Size of the active set at exit (sort-based solvers only).
    pub active: Option<usize>,
}

impl LineSolve {
    pub(crate) fn plain(value: f64) -> Self {
        Self { value, active: None }
    }
}

/// `a − b` elementwise, through slices when both views are contiguous.
pub(crate) fn differences(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Vec<f64> {
    match (a.as_slice(), b.as_slice()) {
        (Some(x), Some(y)) => x.iter().zip(y).map(|(u, v)| u - v).collect(),
        _ => a.iter().zip(b.iter()).map(|(u, v)| u - v).collect(),
    }
}

/// Overwrites `out` with the scores `alpha_i + β_j − C_ij` of one row.
pub(crate) fn fill_scores(
    alpha_i: f64,
    beta: ArrayView1<'_, f64>,
    cost_row: ArrayView1<'_, f64>,
    out: &mut Vec<f64>,
) {
    out.clear();
    match (beta.as_slice(), cost_row.as_slice()) {
        (Some(b), Some(c)) => out.extend(b.iter().zip(c).map(|(bj, cj)| alpha_i + bj - cj)),
        _ => out.extend(beta.iter().zip(cost_row.iter()).map(|(bj, cj)| alpha_i + bj - cj)),
    }
}

fn require_nonnegative(a: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    match a.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!(
            "{what} requires nonnegative finite entries, entry {i} is {}",
            a.iter().nth(i).copied().unwrap_or(f64::NAN)
        ))),
    }
}

fn require_positive(a: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    match a.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Domain(format!(
            "{what} requires strictly positive entries, entry {i} is {}",
            a.iter().nth(i).copied().unwrap_or(f64::NAN)
        ))),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Shannon-entropy regularization, `Φ̃(A) = ⟨A,C⟩ − λ H̃(A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropic {
    lambda: f64,
}

impl Entropic {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda })
    }
}

impl Regularizer for Entropic {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn term(&self, a: ArrayView2<'_, f64>) -> Result<f64> {
        require_nonnegative(a, "entropic potential")?;
        let mut acc = 0.0;
        for &v in a.iter() {
            if v > ZERO_MASS {
                acc += v * v.ln();
            }
            acc -= v;
        }
        Ok(self.lambda * (acc + 1.0))
    }

    fn term_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        require_positive(a, "entropic gradient")?;
        Ok(a.mapv(|v| self.lambda * v.ln()))
    }

    fn support_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        require_nonnegative(a, "entropic gradient")?;
        Ok(a.mapv(|v| self.lambda * v.ln()))
    }

    fn term_conjugate(&self, v: ArrayView2<'_, f64>) -> Option<f64> {
        let s: f64 = v.iter().map(|&x| (x / self.lambda).exp()).sum();
        Some(self.lambda * (s - 1.0))
    }

    fn plan_entry(&self, score: f64) -> Result<f64> {
        Ok((score / self.lambda).exp())
    }

    fn plan_entries(&self, scores: &mut [f64]) -> Result<()> {
        let inv = 1.0 / self.lambda;
        scores.iter_mut().for_each(|s| *s = (*s * inv).exp());
        Ok(())
    }

    fn solve_line(
        &self,
        duals: ArrayView1<'_, f64>,
        costs: ArrayView1<'_, f64>,
        target: f64,
        log_domain: bool,
    ) -> Result<LineSolve> {
        row_solve::entropic_line_solve(self.lambda, duals, costs, target, log_domain)
            .map(LineSolve::plain)
    }

    fn solve_pair(&self, pair: &pair_solve::PairInput<'_>) -> Result<pair_solve::PairSolution> {
        pair_solve::entropic_pair_solve(self.lambda, pair)
    }

    /// `λ (Σ P log(P/Q) − Σ P + Σ Q)`, with `0 log 0 = 0`.
    fn divergence(&self, p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64> {
        require_nonnegative(p, "entropic divergence")?;
        require_nonnegative(q, "entropic divergence")?;
        let m = p.ncols();
        let mut acc = 0.0;
        for (k, (&pv, &qv)) in p.iter().zip(q.iter()).enumerate() {
            if pv > ZERO_MASS {
                if qv <= ZERO_MASS {
                    return Err(Error::Support { row: k / m, col: k % m, p_value: pv });
                }
                acc += pv * (pv / qv).ln();
            }
            acc += qv - pv;
        }
        Ok(self.lambda * acc)
    }
}

/// Squared-norm regularization, `Φ̃(A) = ⟨A,C⟩ + (λ/2)‖A‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    lambda: f64,
}

impl Quadratic {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda })
    }
}

impl Regularizer for Quadratic {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn term(&self, a: ArrayView2<'_, f64>) -> Result<f64> {
        require_nonnegative(a, "quadratic potential")?;
        Ok(0.5 * self.lambda * a.iter().map(|v| v * v).sum::<f64>())
    }

    fn term_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        require_nonnegative(a, "quadratic gradient")?;
        Ok(a.mapv(|v| self.lambda * v))
    }

    fn term_conjugate(&self, v: ArrayView2<'_, f64>) -> Option<f64> {
        let s: f64 = v.iter().map(|&x| x.max(0.0).powi(2)).sum();
        Some(s / (2.0 * self.lambda))
    }

    fn plan_entry(&self, score: f64) -> Result<f64> {
        Ok(score.max(0.0) / self.lambda)
    }

    fn plan_entries(&self, scores: &mut [f64]) -> Result<()> {
        scores.iter_mut().for_each(|s| *s = s.max(0.0) / self.lambda);
        Ok(())
    }

    fn accumulate_row(
        &self,
        alpha_i: f64,
        beta: &[f64],
        cost_row: &[f64],
        _buf: &mut Vec<f64>,
        cols: &mut [f64],
    ) -> Result<f64> {
        let mut sum = 0.0;
        for ((acc, b), c) in cols.iter_mut().zip(beta).zip(cost_row) {
            let a = (alpha_i + b - c).max(0.0) / self.lambda;
            sum += a;
            *acc += a;
        }
        Ok(sum)
    }

    fn solve_line(
        &self,
        duals: ArrayView1<'_, f64>,
        costs: ArrayView1<'_, f64>,
        target: f64,
        _log_domain: bool,
    ) -> Result<LineSolve> {
        let sol = row_solve::quadratic_scan(
            self.lambda,
            &contiguous(&duals),
            &contiguous(&costs),
            target,
        )?;
        Ok(LineSolve { value: sol.alpha, active: Some(sol.active) })
    }

    fn solve_pair(&self, pair: &pair_solve::PairInput<'_>) -> Result<pair_solve::PairSolution> {
        pair_solve::quadratic_pair_solve(pair)
    }

    fn divergence(&self, p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64> {
        require_nonnegative(p, "quadratic divergence")?;
        require_nonnegative(q, "quadratic divergence")?;
        let s: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(0.5 * self.lambda * s)
    }
}

/// Tsallis-entropy regularization through its 1-homogeneous extension,
/// `Φ̃(A) = ⟨A,C⟩ − λ T̃_q(A)` with
/// `T̃_q(A) = (1/(q−1)) Σ (A_ij − (Σ A)^{1−q} A_ij^q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tsallis {
    lambda: f64,
    q: f64,
}

impl Tsallis {
    pub fn new(lambda: f64, q: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(q > 0.0) || !q.is_finite() || q == 1.0 {
            return Err(Error::InvalidParameter(format!(
                "Tsallis index must be positive and different from 1, got {q}"
            )));
        }
        Ok(Self { lambda, q })
    }

    pub fn index(&self) -> f64 {
        self.q
    }

    /// `(q−1)/(λq)`, the scale of the dual score inside the power.
    pub(crate) fn score_scale(&self) -> f64 {
        (self.q - 1.0) / (self.lambda * self.q)
    }

    pub(crate) fn exponent(&self) -> f64 {
        1.0 / (self.q - 1.0)
    }

    /// The homogeneous Tsallis extension `T̃_q(A)`.
    pub fn homogeneous_entropy(&self, a: ArrayView2<'_, f64>) -> Result<f64> {
        require_nonnegative(a, "Tsallis entropy")?;
        let total: f64 = a.sum();
        if !(total > 0.0) {
            return Err(Error::Domain("Tsallis extension needs positive total mass".into()));
        }
        let powers: f64 = a.iter().map(|&v| v.powf(self.q)).sum();
        Ok((total - total.powf(1.0 - self.q) * powers) / (self.q - 1.0))
    }
}

impl Regularizer for Tsallis {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn term(&self, a: ArrayView2<'_, f64>) -> Result<f64> {
        Ok(-self.lambda * self.homogeneous_entropy(a)?)
    }

    fn term_gradient(&self, a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if self.q < 1.0 {
            require_positive(a, "Tsallis gradient with index below 1")?;
        } else {
            require_nonnegative(a, "Tsallis gradient")?;
        }
        let total: f64 = a.sum();
        if !(total > 0.0) {
            return Err(Error::Domain("Tsallis gradient needs positive total mass".into()));
        }
        let q = self.q;
        let sum_pq: f64 = a.iter().map(|&v| (v / total).powf(q)).sum();
        let c = self.lambda / (q - 1.0);
        Ok(a.mapv(|v| c * (q * (v / total).powf(q - 1.0) + (1.0 - q) * sum_pq - 1.0)))
    }

    /// The conjugate of a 1-homogeneous function is a {0, +∞} indicator whose
    /// feasibility test is not implemented.
    fn term_conjugate(&self, _v: ArrayView2<'_, f64>) -> Option<f64> {
        None
    }

    fn plan_entry(&self, score: f64) -> Result<f64> {
        let base = self.score_scale() * score;
        if self.q > 1.0 {
            Ok(if base > 0.0 { base.powf(self.exponent()) } else { 0.0 })
        } else if base > 0.0 {
            Ok(base.powf(self.exponent()))
        } else {
            Err(Error::Domain(format!(
                "Tsallis plan with index {} needs negative dual scores, got {score}",
                self.q
            )))
        }
    }

    fn solve_line(
        &self,
        duals: ArrayView1<'_, f64>,
        costs: ArrayView1<'_, f64>,
        target: f64,
        _log_domain: bool,
    ) -> Result<LineSolve> {
        let gammas = differences(duals, costs);
        row_solve::tsallis_line_solve(self, &gammas, target).map(LineSolve::plain)
    }

    fn solve_pair(&self, pair: &pair_solve::PairInput<'_>) -> Result<pair_solve::PairSolution> {
        pair_solve::tsallis_pair_solve(self, pair)
    }

    fn divergence(&self, p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64> {
        let grad = self.term_gradient(q)?;
        let mut lin = 0.0;
        Zip::from(&grad).and(&p).and(&q).for_each(|&g, &pv, &qv| lin += g * (pv - qv));
        Ok(self.term(p)? - self.term(q)? - lin)
    }
}

/// Which regularizer to use, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegularizerSpec {
    Entropic { lambda: f64 },
    Quadratic { lambda: f64 },
    Tsallis { lambda: f64, q: f64 },
}

impl RegularizerSpec {
    pub fn entropic(lambda: f64) -> Result<Self> {
        Entropic::new(lambda)?;
        Ok(Self::Entropic { lambda })
    }

    pub fn quadratic(lambda: f64) -> Result<Self> {
        Quadratic::new(lambda)?;
        Ok(Self::Quadratic { lambda })
    }

    pub fn tsallis(lambda: f64, q: f64) -> Result<Self> {
        Tsallis::new(lambda, q)?;
        Ok(Self::Tsallis { lambda, q })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Self::Entropic { lambda } | Self::Quadratic { lambda } | Self::Tsallis { lambda, .. } => {
                lambda
            }
        }
    }

    pub fn is_entropic(&self) -> bool {
        matches!(self, Self::Entropic { .. })
    }

    /// Whether optimal plans may contain exact zeros.
    pub fn allows_sparse_plans(&self) -> bool {
        match *self {
            Self::Entropic { .. } => false,
            Self::Quadratic { .. } => true,
            Self::Tsallis { q, .. } => q > 1.0,
        }
    }

    /// Validated implementation behind this spec.
    pub fn build(&self) -> Result<Box<dyn Regularizer>> {
        Ok(match *self {
            Self::Entropic { lambda } => Box::new(Entropic::new(lambda)?),
            Self::Quadratic { lambda } => Box::new(Quadratic::new(lambda)?),
            Self::Tsallis { lambda, q } => Box::new(Tsallis::new(lambda, q)?),
        })
    }
}

/// Dual potentials `(α, β)`; the plan family is `A(α, β)`.
///
/// Potentials are defined up to the shift `(α + c, β − c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
}

impl DualPotentials {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { alpha: Array1::zeros(n), beta: Array1::zeros(m) }
    }

    pub fn new(alpha: Array1<f64>, beta: Array1<f64>) -> Result<Self> {
        if alpha.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dual potentials must be finite".into()));
        }
        Ok(Self { alpha, beta })
    }

    /// Shifted copy with the last β entry equal to zero.
    pub fn canonical(&self) -> Self {
        let shift = self.beta.last().copied().unwrap_or(0.0);
        Self { alpha: &self.alpha + shift, beta: &self.beta - shift }
    }

    /// `α ⊕ β`, the matrix with entries `α_i + β_j`.
    pub fn outer_sum(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.alpha.len(), self.beta.len()), |(i, j)| {
            self.alpha[i] + self.beta[j]
        })
    }
}

/// `Φ̃(A) = ⟨A, C⟩ + R(A)`.
pub fn potential(reg: &RegularizerSpec, cost: &CostMatrix, a: ArrayView2<'_, f64>) -> Result<f64> {
    cost.require_dims(a.nrows(), a.ncols())?;
    let linear: f64 = a.iter().zip(cost.view().iter()).map(|(x, c)| x * c).sum();
    Ok(linear + reg.build()?.term(a)?)
}

/// The gradient map `S(A) = C + ∇R(A)`.
pub fn gradient(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    a: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    cost.require_dims(a.nrows(), a.ncols())?;
    Ok(reg.build()?.term_gradient(a)? + cost.view())
}

/// `A(α, β)`: the plan whose gradient is `α ⊕ β` on its support.
pub fn plan_from_potentials(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    pot: &DualPotentials,
) -> Result<Array2<f64>> {
    plan_with(reg.build()?.as_ref(), cost, pot)
}

pub(crate) fn plan_with(
    reg: &dyn Regularizer,
    cost: &CostMatrix,
    pot: &DualPotentials,
) -> Result<Array2<f64>> {
    let (n, m) = (pot.alpha.len(), pot.beta.len());
    cost.require_dims(n, m)?;
    let c = cost.view();
    let mut out = Vec::with_capacity(n * m);
    let mut row = Vec::with_capacity(m);
    for i in 0..n {
        fill_scores(pot.alpha[i], pot.beta.view(), c.row(i), &mut row);
        reg.plan_entries(&mut row)?;
        out.extend_from_slice(&row);
    }
    Ok(Array2::from_shape_vec((n, m), out).expect("n·m entries"))
}

/// Legendre conjugate `Φ̃*(u)`; `None` for Tsallis.
pub fn conjugate(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    u: ArrayView2<'_, f64>,
) -> Result<Option<f64>> {
    cost.require_dims(u.nrows(), u.ncols())?;
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("conjugate argument must be finite".into()));
    }
    let shifted = &u - &cost.view();
    Ok(reg.build()?.term_conjugate(shifted.view()))
}

/// Optimality residual of a plan: how far `S(P)` is from having the
/// separable form `α_i + β_j`.
///
/// With full support this is `max |S_ij − S_im − S_nj + S_nm|` (last row and
/// column as reference). When the plan has zeros (quadratic, Tsallis with
/// index above 1) the check is restricted to the support: potentials are
/// propagated along a spanning forest of the support graph and the residual
/// is the largest mismatch on the remaining support cells.
pub fn theta_residual(reg: &RegularizerSpec, cost: &CostMatrix, plan: &TransportPlan) -> Result<f64> {
    theta_residual_with(reg.build()?.as_ref(), cost, plan.view(), reg.allows_sparse_plans())
}

pub(crate) fn theta_residual_with(
    reg: &dyn Regularizer,
    cost: &CostMatrix,
    plan: ArrayView2<'_, f64>,
    sparse_ok: bool,
) -> Result<f64> {
    let (n, m) = plan.dim();
    cost.require_dims(n, m)?;
    let full_support = plan.iter().all(|&v| v > ZERO_MASS);
    if !full_support && !sparse_ok {
        return Err(Error::Domain("theta residual needs a strictly positive plan".into()));
    }
    if !full_support {
        let s = reg.support_gradient(plan)? + cost.view();
        return Ok(support_residual(&s, plan));
    }
    let s = reg.term_gradient(plan)? + cost.view();
    {
        let mut worst: f64 = 0.0;
        let corner = s[[n - 1, m - 1]];
        for i in 0..n {
            let last = s[[i, m - 1]];
            for j in 0..m {
                let r = s[[i, j]] - last - s[[n - 1, j]] + corner;
                worst = worst.max(r.abs());
            }
        }
        Ok(worst)
    }
}

fn support_residual(s: &Array2<f64>, plan: ArrayView2<'_, f64>) -> f64 {
    let (n, m) = plan.dim();
    let mut alpha = vec![f64::NAN; n];
    let mut beta = vec![f64::NAN; m];
    // Breadth-first walk of the bipartite support graph; node < n is a row.
    let mut queue = std::collections::VecDeque::new();
    for root in 0..n {
        if !alpha[root].is_nan() {
            continue;
        }
        alpha[root] = 0.0;
        queue.push_back(root);
        while let Some(node) = queue.pop_front() {
            if node < n {
                let i = node;
                for j in 0..m {
                    if plan[[i, j]] > ZERO_MASS && beta[j].is_nan() {
                        beta[j] = s[[i, j]] - alpha[i];
                        queue.push_back(n + j);
                    }
                }
            } else {
                let j = node - n;
                for i in 0..n {
                    if plan[[i, j]] > ZERO_MASS && alpha[i].is_nan() {
                        alpha[i] = s[[i, j]] - beta[j];
                        queue.push_back(i);
                    }
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..m {
            if plan[[i, j]] > ZERO_MASS {
                worst = worst.max((s[[i, j]] - alpha[i] - beta[j]).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn zero_cost(n: usize, m: usize) -> CostMatrix {
        CostMatrix::zeros(n, m).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(RegularizerSpec::entropic(0.0).is_err());
        assert!(RegularizerSpec::quadratic(-1.0).is_err());
        assert!(RegularizerSpec::tsallis(1.0, 1.0).is_err());
        assert!(RegularizerSpec::tsallis(1.0, 0.0).is_err());
        assert!(RegularizerSpec::tsallis(1.0, -0.5).is_err());
        assert!(RegularizerSpec::tsallis(1.0, 0.5).is_ok());
    }

    #[test]
    fn entropic_potential_of_uniform_plan() {
        let reg = RegularizerSpec::entropic(1.0).unwrap();
        let a = Array2::from_elem((2, 2), 0.25);
        let v = potential(&reg, &zero_cost(2, 2), a.view()).unwrap();
        assert_relative_eq!(v, -(4.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn quadratic_potential_of_diagonal_plan() {
        let reg = RegularizerSpec::quadratic(2.0).unwrap();
        let a = array![[0.5, 0.0], [0.0, 0.5]];
        let v = potential(&reg, &zero_cost(2, 2), a.view()).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tsallis_term_is_homogeneous() {
        let t = Tsallis::new(0.7, 1.6).unwrap();
        let a = array![[0.1, 0.3], [0.2, 0.4]];
        let base = t.term(a.view()).unwrap();
        let scaled = t.term((&a * 3.0).view()).unwrap();
        assert_relative_eq!(scaled, 3.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn entropic_gradient_at_e() {
        let reg = RegularizerSpec::entropic(1.0).unwrap();
        let a = Array2::from_elem((2, 3), std::f64::consts::E);
        let g = gradient(&reg, &zero_cost(2, 3), a.view()).unwrap();
        for v in g.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn quadratic_gradient_adds_cost() {
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let g = gradient(&reg, &c, Array2::from_elem((2, 2), 0.25).view()).unwrap();
        assert_eq!(g, array![[0.25, 1.25], [1.25, 0.25]]);
    }

    #[test]
    fn tsallis_gradient_uniform_index_two() {
        let reg = RegularizerSpec::tsallis(1.0, 2.0).unwrap();
        let g = gradient(&reg, &zero_cost(2, 2), Array2::from_elem((2, 2), 0.25).view()).unwrap();
        for v in g.iter() {
            assert_relative_eq!(*v, -0.75, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradients_reject_out_of_domain() {
        let a = array![[0.5, 0.0], [0.25, 0.25]];
        let c = zero_cost(2, 2);
        assert!(gradient(&RegularizerSpec::entropic(1.0).unwrap(), &c, a.view()).is_err());
        assert!(gradient(&RegularizerSpec::tsallis(1.0, 0.5).unwrap(), &c, a.view()).is_err());
        assert!(gradient(&RegularizerSpec::quadratic(1.0).unwrap(), &c, a.view()).is_ok());
        assert!(gradient(&RegularizerSpec::tsallis(1.0, 2.0).unwrap(), &c, a.view()).is_ok());
        let neg = array![[1.5, -0.5]];
        assert!(potential(&RegularizerSpec::quadratic(1.0).unwrap(), &zero_cost(1, 2), neg.view())
            .is_err());
    }

    #[test]
    fn plan_from_zero_potentials_entropic() {
        let reg = RegularizerSpec::entropic(1.0).unwrap();
        let p = plan_from_potentials(&reg, &zero_cost(2, 3), &DualPotentials::zeros(2, 3)).unwrap();
        assert!(p.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn plan_from_potentials_quadratic_positive_part() {
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let c = CostMatrix::new(array![[0.5, 2.0], [0.0, 0.0]]).unwrap();
        let pot = DualPotentials::new(array![1.0, 0.0], array![0.0, 0.0]).unwrap();
        let p = plan_from_potentials(&reg, &c, &pot).unwrap();
        assert_eq!(p, array![[0.5, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn plan_from_potentials_tsallis_index_two_is_linear() {
        let reg = RegularizerSpec::tsallis(0.5, 2.0).unwrap();
        let pot = DualPotentials::new(array![0.25, 1.0], array![0.75, 0.0]).unwrap();
        let c = CostMatrix::new(array![[0.0, -0.75], [0.75, 0.0]]).unwrap();
        let p = plan_from_potentials(&reg, &c, &pot).unwrap();
        for v in p.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn tsallis_below_one_rejects_nonnegative_scores() {
        let reg = RegularizerSpec::tsallis(1.0, 0.5).unwrap();
        let r = plan_from_potentials(&reg, &zero_cost(1, 1), &DualPotentials::zeros(1, 1));
        assert!(matches!(r, Err(Error::Domain(_))));
        let pot = DualPotentials::new(array![-1.0], array![0.0]).unwrap();
        let p = plan_from_potentials(&reg, &zero_cost(1, 1), &pot).unwrap();
        // ((−0.5/0.5)(−1))^{−2} = 1
        assert_relative_eq!(p[[0, 0]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn entropic_conjugate_at_cost() {
        let reg = RegularizerSpec::entropic(3.0).unwrap();
        let c = CostMatrix::new(array![[0.3, 1.0], [2.0, 0.1]]).unwrap();
        let v = conjugate(&reg, &c, c.view()).unwrap().unwrap();
        assert_relative_eq!(v, 9.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_conjugate_positive_part() {
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let v = conjugate(&reg, &zero_cost(1, 2), array![[1.0, -1.0]].view()).unwrap().unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn tsallis_conjugate_unavailable() {
        let reg = RegularizerSpec::tsallis(1.0, 1.5).unwrap();
        assert_eq!(conjugate(&reg, &zero_cost(1, 1), array![[0.0]].view()).unwrap(), None);
    }

    #[test]
    fn canonical_potentials_keep_plan() {
        let reg = RegularizerSpec::entropic(0.5).unwrap();
        let c = CostMatrix::new(array![[0.3, 1.0], [2.0, 0.1]]).unwrap();
        let pot = DualPotentials::new(array![0.2, -0.4], array![1.0, 0.7]).unwrap();
        let can = pot.canonical();
        assert_eq!(can.beta[1], 0.0);
        let a = plan_from_potentials(&reg, &c, &pot).unwrap();
        let b = plan_from_potentials(&reg, &c, &can).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-14);
        }
    }

    #[test]
    fn theta_residual_vanishes_for_separable_cost() {
        let reg = RegularizerSpec::entropic(1.0).unwrap();
        let c = CostMatrix::new(Array2::from_shape_fn((3, 4), |(i, j)| i as f64 * 0.3 + j as f64)).unwrap();
        let plan = TransportPlan::uniform(3, 4).unwrap();
        assert!(theta_residual(&reg, &c, &plan).unwrap() < 1e-14);
    }

    #[test]
    fn theta_residual_positive_for_non_product_plan() {
        // S = log P with C = 0; the alternating sum at (0,0) against the last
        // row/column is log(P00 P22 / (P02 P20)).
        let reg = RegularizerSpec::entropic(1.0).unwrap();
        let raw = array![[0.2, 0.05, 0.05], [0.05, 0.1, 0.05], [0.1, 0.1, 0.3]];
        let plan = TransportPlan::new(raw.clone()).unwrap();
        let r = theta_residual(&reg, &zero_cost(3, 3), &plan).unwrap();
        let mut brute: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let v = (raw[[i, j]] * raw[[2, 2]] / (raw[[i, 2]] * raw[[2, j]])).ln();
                brute = brute.max(v.abs());
            }
        }
        assert!(r > 0.1);
        assert_relative_eq!(r, brute, max_relative = 1e-12);
    }

    #[test]
    fn theta_residual_on_sparse_support() {
        // Quadratic plan with zeros built from potentials: separable on support.
        let reg = RegularizerSpec::quadratic(1.0).unwrap();
        let c = CostMatrix::new(array![[0.0, 1.0, 3.0], [2.0, 0.0, 0.5], [3.0, 1.0, 0.0]]).unwrap();
        let pot = DualPotentials::new(array![0.3, 0.4, 0.2], array![0.1, 0.2, 0.05]).unwrap();
        let a = plan_from_potentials(&reg, &c, &pot).unwrap();
        let total = a.sum();
        assert!(a.iter().any(|&v| v == 0.0));
        let r = theta_residual_with(&Quadratic::new(1.0).unwrap(), &c, (&a / total).view(), true);
        // Scaling by 1/total breaks separability only through λA; check the
        // unscaled plan directly instead.
        assert!(r.is_ok());
        let r = theta_residual_with(&Quadratic::new(1.0).unwrap(), &c, a.view(), true).unwrap();
        assert!(r < 1e-14, "residual {r}");
    }
}

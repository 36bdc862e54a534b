//! Objectives and divergences on transport plans.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::regularizer::{plan_from_potentials, potential, DualPotentials, RegularizerSpec};
use crate::types::{CostMatrix, Histogram, TransportPlan, ZERO_MASS};

/// Row sums and column sums of a plan.
pub fn marginals(plan: &TransportPlan) -> (Array1<f64>, Array1<f64>) {
    plan.marginals()
}

/// `⟨P, C⟩`.
pub fn transport_cost(plan: &TransportPlan, cost: &CostMatrix) -> Result<f64> {
    let (n, m) = plan.dim();
    cost.require_dims(n, m)?;
    Ok(plan.view().iter().zip(cost.view().iter()).map(|(p, c)| p * c).sum())
}

/// Shannon entropy `−Σ P log P` with `0 log 0 = 0`.
pub fn shannon_entropy(plan: &TransportPlan) -> f64 {
    -plan
        .view()
        .iter()
        .filter(|&&v| v > ZERO_MASS)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Tsallis entropy `(1 − Σ P^q)/(q − 1)`.
pub fn tsallis_entropy(plan: &TransportPlan, q: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() || q == 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Tsallis index must be positive and different from 1, got {q}"
        )));
    }
    let s: f64 = plan.view().iter().filter(|&&v| v > ZERO_MASS).map(|&v| v.powf(q)).sum();
    Ok((1.0 - s) / (q - 1.0))
}

/// `KL(P‖Q) = Σ P log(P/Q)`.
pub fn kl_divergence(p: &TransportPlan, q: &TransportPlan) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", p.dim()),
            got: format!("{:?}", q.dim()),
        });
    }
    let m = p.dim().1;
    let mut acc = 0.0;
    for (k, (&a, &b)) in p.view().iter().zip(q.view().iter()).enumerate() {
        if a <= ZERO_MASS {
            continue;
        }
        if b <= ZERO_MASS {
            return Err(Error::Support { row: k / m, col: k % m, p_value: a });
        }
        acc += a * (a / b).ln();
    }
    Ok(acc)
}

/// Bregman divergence `Φ̃(P) − Φ̃(Q) − ⟨S(Q), P − Q⟩` of a regularizer.
///
/// The linear cost cancels, so no cost matrix is needed.
pub fn bregman_divergence(
    reg: &RegularizerSpec,
    p: &TransportPlan,
    q: &TransportPlan,
) -> Result<f64> {
    bregman_divergence_matrices(reg, p.view(), q.view())
}

/// [`bregman_divergence`] on raw matrices, for iterates that are not yet
/// normalized plans.
pub fn bregman_divergence_matrices(
    reg: &RegularizerSpec,
    p: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", p.dim()),
            got: format!("{:?}", q.dim()),
        });
    }
    reg.build()?.divergence(p, q)
}

/// Divergence of `reference` from the iterate `A(α, β)`, taken with the
/// subgradient `α ⊕ β` that the dual iterate carries:
///
/// ```text
/// Φ̃(P) − Φ̃(A) − ⟨α ⊕ β, P − A⟩
/// ```
///
/// Where `A` has full support this is the Bregman divergence. On zero
/// entries of a quadratic iterate the score `α_i + β_j − C_ij` is negative
/// and differs from the gradient `λA_ij = 0`; this form keeps that
/// information and, for `P` in Π(p, q), equals the dual suboptimality of
/// `(α, β)`.
pub fn subgradient_divergence(
    reg: &RegularizerSpec,
    cost: &CostMatrix,
    reference: ArrayView2<'_, f64>,
    pot: &DualPotentials,
) -> Result<f64> {
    cost.require_dims(reference.nrows(), reference.ncols())?;
    let a = plan_from_potentials(reg, cost, pot)?;
    let scores = pot.outer_sum();
    let mut lin = 0.0;
    ndarray::Zip::from(&scores).and(&reference).and(&a).for_each(|&s, &p, &q| lin += s * (p - q));
    Ok(potential(reg, cost, reference)? - potential(reg, cost, a.view())? - lin)
}

/// Maps a nonnegative matrix onto Π(p, q): rows are scaled down to at most
/// `p`, columns to at most `q`, and the missing mass is added back as a
/// rank-one correction. The result has exact marginals (up to rounding) and
/// lies within `2(‖r(A) − p‖₁ + ‖c(A) − q‖₁)` of `A` in L1.
pub fn round_to_marginals(a: ArrayView2<'_, f64>, p: &Histogram, q: &Histogram) -> Array2<f64> {
    let mut x = a.to_owned();
    let rows = x.sum_axis(Axis(1));
    for (mut row, (&r, &target)) in x.rows_mut().into_iter().zip(rows.iter().zip(p.values())) {
        if r > target {
            row *= target / r;
        }
    }
    let cols = x.sum_axis(Axis(0));
    for (mut col, (&c, &target)) in x.columns_mut().into_iter().zip(cols.iter().zip(q.values())) {
        if c > target {
            col *= target / c;
        }
    }
    let er: Vec<f64> = x
        .sum_axis(Axis(1))
        .iter()
        .zip(p.values())
        .map(|(r, t)| (t - r).max(0.0))
        .collect();
    let ec: Vec<f64> = x
        .sum_axis(Axis(0))
        .iter()
        .zip(q.values())
        .map(|(c, t)| (t - c).max(0.0))
        .collect();
    let mass: f64 = er.iter().sum();
    if mass > 0.0 {
        for (i, &ei) in er.iter().enumerate() {
            if ei == 0.0 {
                continue;
            }
            for (j, &ej) in ec.iter().enumerate() {
                x[[i, j]] += ei * ej / mass;
            }
        }
    }
    x
}

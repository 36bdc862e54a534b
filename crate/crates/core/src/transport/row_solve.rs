//! One-dimensional marginal equations.
//!
//! Row `i` of the row projection solves `Σ_j a(x + γ_j) = p_i` for the scalar
//! `x = α_i`, where `γ_j = β_j − C_ij` and `a` is the regularizer's plan map.
//! The column projection is the same equation with the roles swapped.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::regularizer::Tsallis;
use crate::scalar::{
    contiguous, differences_above, max_difference, newton_bisect, DescendingPrefix, Eval,
};

/// Acceptance threshold of the active-set scan, relative to `max(1, p)`.
pub(crate) const SCAN_TOL: f64 = 1e-10;

/// Relative residual targeted by the Newton solves.
const NEWTON_RTOL: f64 = 1e-13;

/// Bracket extensions attempted before giving up.
const MAX_DOUBLINGS: usize = 64;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic line solve: `x = λ log t − λ log Σ_k exp((d_k − c_k)/λ)`.
///
/// The plain path forms the sum as `Σ_k exp(−c_k/λ) exp(d_k/λ)`, i.e. the
/// product `K v` of the scaling form, and reports an underflow when it
/// vanishes. The log-domain path uses a shifted log-sum-exp.
pub(crate) fn entropic_line_solve(
    lambda: f64,
    duals: ArrayView1<'_, f64>,
    costs: ArrayView1<'_, f64>,
    target: f64,
    log_domain: bool,
) -> Result<f64> {
    if target == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if log_domain {
        let lse = log_sum_exp(duals.iter().zip(costs.iter()).map(|(d, c)| (d - c) / lambda));
        if !lse.is_finite() {
            return Err(Error::Domain("log-sum-exp of the dual scores is not finite".into()));
        }
        return Ok(lambda * (target.ln() - lse));
    }
    let denom: f64 = duals
        .iter()
        .zip(costs.iter())
        .map(|(d, c)| (-c / lambda).exp() * (d / lambda).exp())
        .sum();
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Underflow { axis: "row", index: 0 });
    }
    let x = lambda * (target / denom).ln();
    if x.is_nan() || x == f64::INFINITY {
        return Err(Error::Underflow { axis: "row", index: 0 });
    }
    Ok(x)
}

/// Output of the quadratic scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRowSolution {
    pub alpha: f64,
    /// Active-set size `J` at which the scan exited.
    pub active: usize,
}

/// Quadratic line solve by the sorted active-set scan, with
/// `γ_j = duals_j − costs_j`.
///
/// For `J = 1, 2, …` the candidate `x_J = (λt − Σ_{j≤J} γ↓_j)/J` is tested
/// against `|Σ_j (x_J + γ_j)⁺/λ − t| ≤ 1e-10·max(1, t)` and the first passing
/// candidate is returned. Values `γ_j ≤ max γ − λt` can never be active and
/// are dropped before sorting.
pub(crate) fn quadratic_scan(
    lambda: f64,
    duals: &[f64],
    costs: &[f64],
    target: f64,
) -> Result<QuadraticRowSolution> {
    if duals.is_empty() {
        return Err(Error::Empty("line of the cost matrix"));
    }
    let top = max_difference(duals, costs)
        .filter(|t| t.is_finite())
        .ok_or_else(|| Error::Domain("non-finite dual score".into()))?;
    if target <= 0.0 {
        return Ok(QuadraticRowSolution { alpha: -top, active: 0 });
    }
    let mass = lambda * target;
    let candidates = differences_above(duals, costs, top - mass);
    let mut prefix = DescendingPrefix::new(candidates);
    let tol = SCAN_TOL * target.max(1.0);
    let mut fallback = None;
    for j in 1..=prefix.len() {
        let s = prefix.prefix_sum(j);
        let x = (mass - s) / j as f64;
        if j < prefix.len() && x + prefix.get(j) > 0.0 {
            // The next entry is still active, so J is too small.
            fallback = Some((x, j));
            continue;
        }
        let excess = (j as f64 * x + s - mass) + prefix.positive_part_correction(j, x);
        if (excess / lambda).abs() <= tol {
            return Ok(QuadraticRowSolution { alpha: x, active: j });
        }
        if x + prefix.get(j - 1) > 0.0 {
            fallback = Some((x, j));
        }
    }
    // Rounding kept every candidate out of tolerance: take the largest J that
    // is consistent with its own active set.
    let (alpha, active) = fallback.unwrap_or((mass - top, 1));
    Ok(QuadraticRowSolution { alpha, active })
}

/// Tsallis line solve by bracketed Newton iteration.
pub(crate) fn tsallis_line_solve(t: &Tsallis, gammas: &[f64], target: f64) -> Result<f64> {
    if gammas.is_empty() {
        return Err(Error::Empty("line of the cost matrix"));
    }
    let q = t.index();
    let top = gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Domain("non-finite dual score".into()));
    }
    if target <= 0.0 {
        if q > 1.0 {
            return Ok(-top);
        }
        return Err(Error::Domain(format!(
            "Tsallis index {q} below 1 needs strictly positive marginals"
        )));
    }
    let kappa = t.score_scale();
    let e = t.exponent();
    let eval = |x: f64| -> Result<Eval> {
        let mut value = 0.0;
        let mut slope = 0.0;
        for &g in gammas {
            let base = kappa * (x + g);
            if base > 0.0 {
                let pw = base.powf(e - 1.0);
                value += pw * base;
                slope += e * kappa * pw;
            } else if q < 1.0 {
                return Err(Error::Domain(format!("Tsallis score left the domain at {x}")));
            }
        }
        Ok(Eval { value: value - target, slope, scale: target })
    };
    let m = gammas.len() as f64;
    let (mut lo, mut hi) = if q > 1.0 {
        (-top, -top + target.powf(q - 1.0) / kappa)
    } else {
        let k = kappa.abs();
        (-top - (target / m).powf(q - 1.0) / k, -top - target.powf(q - 1.0) / k)
    };
    // Rounding can put the analytic bracket on the wrong side by a hair;
    // widen geometrically in that case.
    let mut grown = 0;
    while eval(lo)?.value > 0.0 {
        grown += 1;
        if grown > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!("no lower bracket below {lo} for target {target}")));
        }
        lo = hi - 2.0 * (hi - lo);
    }
    let mut grown = 0;
    loop {
        let v = eval(hi)?.value;
        if v >= 0.0 {
            if v == 0.0 {
                return Ok(hi);
            }
            break;
        }
        grown += 1;
        if grown > MAX_DOUBLINGS {
            return Err(Error::Bracket(format!("no upper bracket above {hi} for target {target}")));
        }
        if q > 1.0 {
            hi = lo + 2.0 * (hi - lo);
        } else {
            hi = 0.5 * (hi - top);
        }
    }
    let root = newton_bisect(eval, lo, hi, 0.5 * (lo + hi), NEWTON_RTOL)?;
    if q < 1.0 && root + top >= 0.0 {
        return Err(Error::Domain("Tsallis root reached the domain boundary".into()));
    }
    Ok(root)
}

/// Quadratic row solve for row `i`: `Σ_j (α_i + β_j − C_ij)⁺/λ = p_i`.
pub fn quadratic_row_solve(
    lambda: f64,
    beta: ArrayView1<'_, f64>,
    p_i: f64,
    cost_row: ArrayView1<'_, f64>,
) -> Result<QuadraticRowSolution> {
    check_line(lambda, beta, p_i, cost_row)?;
    quadratic_scan(lambda, &contiguous(&beta), &contiguous(&cost_row), p_i)
}

/// Tsallis row solve for row `i`: `Σ_j a_q(α_i + β_j − C_ij) = p_i`.
pub fn tsallis_row_solve(
    lambda: f64,
    q: f64,
    beta: ArrayView1<'_, f64>,
    p_i: f64,
    cost_row: ArrayView1<'_, f64>,
) -> Result<f64> {
    let t = Tsallis::new(lambda, q)?;
    check_line(lambda, beta, p_i, cost_row)?;
    let gammas: Vec<f64> = beta.iter().zip(cost_row.iter()).map(|(b, c)| b - c).collect();
    tsallis_line_solve(&t, &gammas, p_i)
}

fn check_line(
    lambda: f64,
    beta: ArrayView1<'_, f64>,
    p_i: f64,
    cost_row: ArrayView1<'_, f64>,
) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if beta.len() != cost_row.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} potentials", cost_row.len()),
            got: format!("{}", beta.len()),
        });
    }
    if !(p_i >= 0.0) || !p_i.is_finite() {
        return Err(Error::InvalidParameter(format!("marginal entry must be nonnegative, got {p_i}")));
    }
    Ok(())
}

#[cfg(test)]
fn quadratic_line_solve(lambda: f64, gammas: Vec<f64>, target: f64) -> Result<QuadraticRowSolution> {
    quadratic_scan(lambda, &gammas, &vec![0.0; gammas.len()], target)
}

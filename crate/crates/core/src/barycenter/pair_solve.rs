//! Two-input consensus equations of the split barycenter step.
//!
//! For one column `j` and the adjacent inputs `k, k+1` we look for
//! `(b1, b2) = (β^k_j, β^{k+1}_j)` with
//!
//! ```text
//! f1(b1) = f2(b2)          f_s(b) = Σ_i a(γ^s_i + b),  γ^s_i = α^s_i − C_ij
//! r1 b1 + r2 b2 = σ
//! ```
//!
//! Substituting `b2 = (σ − r1 b1)/r2` leaves one increasing scalar equation
//! `g(b1) = f1(b1) − f2(b2(b1)) = 0`.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::regularizer::{differences, Tsallis};
use crate::scalar::{
    contiguous, differences_above, max_difference, newton_bisect, DescendingPrefix, Eval,
};

/// Acceptance threshold of the two-pointer scan, relative to `max(1, f1)`.
const SCAN_TOL: f64 = 1e-10;

const NEWTON_RTOL: f64 = 1e-13;

const MAX_BISECTIONS: usize = 200;

/// Inputs of one pair solve.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    /// `α^k`.
    pub alpha1: ArrayView1<'a, f64>,
    /// `α^{k+1}`.
    pub alpha2: ArrayView1<'a, f64>,
    /// Column `j` of the cost matrix.
    pub costs: ArrayView1<'a, f64>,
    /// Right-hand side `σ = −Σ_{l≠k,k+1} r_l β^l_j`.
    pub sigma: f64,
    pub r1: f64,
    pub r2: f64,
}

impl PairInput<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.costs.len();
        if n == 0 {
            return Err(Error::Empty("cost column"));
        }
        if self.alpha1.len() != n || self.alpha2.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} potentials"),
                got: format!("{} and {}", self.alpha1.len(), self.alpha2.len()),
            });
        }
        if !(self.r1 > 0.0) || !(self.r2 > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pair weights must be positive and sigma finite, got r = ({}, {}), sigma = {}",
                self.r1, self.r2, self.sigma
            )));
        }
        Ok(())
    }

    fn gammas(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let g1 = differences(self.alpha1, self.costs);
        let g2 = differences(self.alpha2, self.costs);
        if g1.iter().chain(g2.iter()).any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(nonfinite_score());
        }
        Ok((g1, g2))
    }

    fn partner(&self, b1: f64) -> f64 {
        (self.sigma - self.r1 * b1) / self.r2
    }
}

/// Solution of one pair solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolution {
    pub beta1: f64,
    pub beta2: f64,
    /// The scan failed and the bisection fallback produced the answer.
    pub fallback: bool,
}

fn nonfinite_score() -> Error {
    Error::Domain("non-finite dual score in pair solve".into())
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn log_sum_exp(v: &[f64], lambda: f64) -> f64 {
    let m = max_of(v);
    if !m.is_finite() {
        return m;
    }
    m / lambda + v.iter().map(|x| ((x - m) / lambda).exp()).sum::<f64>().ln()
}

/// Entropic pair: `f_s(b) = e^{b/λ} Σ_i e^{γ^s_i/λ}`, solved in closed form.
pub fn entropic_pair_solve(lambda: f64, pair: &PairInput<'_>) -> Result<PairSolution> {
    pair.validate()?;
    let (g1, g2) = pair.gammas()?;
    let (l1, l2) = (log_sum_exp(&g1, lambda), log_sum_exp(&g2, lambda));
    if !l1.is_finite() || !l2.is_finite() {
        return Err(Error::Domain("entropic pair solve needs finite potentials".into()));
    }
    // b1/λ + l1 = b2/λ + l2 together with r1 b1 + r2 b2 = σ.
    let b1 = (pair.sigma - pair.r2 * lambda * (l1 - l2)) / (pair.r1 + pair.r2);
    Ok(PairSolution { beta1: b1, beta2: pair.partner(b1), fallback: false })
}

/// Quadratic pair by the two-pointer active-set scan.
///
/// `λ` cancels from the equation, so it is not an input. Both lists are
/// sorted in descending order; for active-set sizes `(I1, I2)` the candidate
///
/// ```text
/// b1 = (I2 σ − r2 (S1 − S2)) / (r2 I1 + r1 I2)
/// ```
///
/// (with `S_s` the partial sums of the sorted lists) balances the truncated
/// sums exactly. It is accepted when `|f1 − f2| ≤ 1e-10·max(1, f1)`;
/// otherwise the pointer of the side with the larger full sum advances (the
/// first side on ties). If the scan runs out, bisection on `g` takes over.
pub fn quadratic_pair_solve(pair: &PairInput<'_>) -> Result<PairSolution> {
    pair.validate()?;
    let c = contiguous(&pair.costs);
    let (a1, a2) = (contiguous(&pair.alpha1), contiguous(&pair.alpha2));
    let m1 = max_difference(&a1, &c).ok_or_else(nonfinite_score)?;
    let m2 = max_difference(&a2, &c).ok_or_else(nonfinite_score)?;
    // f1 vanishes for b1 ≤ upper, f2 vanishes for b1 ≥ lower.
    let upper = -m1;
    let lower = (pair.sigma + pair.r2 * m2) / pair.r1;
    if lower <= upper {
        let b1 = 0.5 * (lower + upper);
        return Ok(PairSolution { beta1: b1, beta2: pair.partner(b1), fallback: false });
    }
    // The root lies in (upper, lower); drop entries that stay inactive there.
    let cut1 = -lower;
    let cut2 = -pair.partner(upper);
    let mut s1 = DescendingPrefix::new(differences_above(&a1, &c, cut1));
    let mut s2 = DescendingPrefix::new(differences_above(&a2, &c, cut2));
    let (mut i1, mut i2) = (1usize, 1usize);
    while i1 <= s1.len() && i2 <= s2.len() {
        let (p1, p2) = (s1.prefix_sum(i1), s2.prefix_sum(i2));
        let b1 = (i2 as f64 * pair.sigma - pair.r2 * (p1 - p2))
            / (pair.r2 * i1 as f64 + pair.r1 * i2 as f64);
        let b2 = pair.partner(b1);
        let f1 = i1 as f64 * b1 + p1 + s1.positive_part_correction(i1, b1);
        let f2 = i2 as f64 * b2 + p2 + s2.positive_part_correction(i2, b2);
        if (f1 - f2).abs() <= SCAN_TOL * f1.max(1.0) {
            return Ok(PairSolution { beta1: b1, beta2: b2, fallback: false });
        }
        if f1 - f2 >= 0.0 {
            i1 += 1;
        } else {
            i2 += 1;
        }
    }
    let (mut lo, mut hi) = (upper, lower);
    let mut b1 = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        b1 = 0.5 * (lo + hi);
        let f1 = s1.positive_part_sum(b1);
        let f2 = s2.positive_part_sum(pair.partner(b1));
        let g = f1 - f2;
        if g.abs() <= SCAN_TOL * f1.max(1.0) * 1e-3 {
            break;
        }
        if g < 0.0 {
            lo = b1;
        } else {
            hi = b1;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    Ok(PairSolution { beta1: b1, beta2: pair.partner(b1), fallback: true })
}

/// Tsallis pair by Newton iteration on `g(b1)` safeguarded by bisection.
pub fn tsallis_pair_solve(t: &Tsallis, pair: &PairInput<'_>) -> Result<PairSolution> {
    pair.validate()?;
    let (g1, g2) = pair.gammas()?;
    let (m1, m2) = (max_of(&g1), max_of(&g2));
    let kappa = t.score_scale();
    let e = t.exponent();
    let below_one = t.index() < 1.0;
    let side = |gs: &[f64], b: f64| -> Result<(f64, f64)> {
        let (mut v, mut d) = (0.0, 0.0);
        for &g in gs {
            let base = kappa * (g + b);
            if base > 0.0 {
                let pw = base.powf(e - 1.0);
                v += pw * base;
                d += e * kappa * pw;
            } else if below_one {
                return Err(Error::Domain(format!("Tsallis pair score left the domain at {b}")));
            }
        }
        Ok((v, d))
    };
    let eval = |b1: f64| -> Result<Eval> {
        let (f1, d1) = side(&g1, b1)?;
        let (f2, d2) = side(&g2, pair.partner(b1))?;
        Ok(Eval { value: f1 - f2, slope: d1 + pair.r1 / pair.r2 * d2, scale: f1 + f2 })
    };
    let upper = -m1;
    let lower = (pair.sigma + pair.r2 * m2) / pair.r1;
    let (lo, hi) = if below_one {
        // Both scores must stay negative: b1 < −max γ¹ and b2 < −max γ².
        if lower >= upper {
            return Err(Error::Bracket(format!(
                "empty Tsallis pair domain ({lower}, {upper})"
            )));
        }
        (lower, upper)
    } else {
        if lower <= upper {
            let b1 = 0.5 * (lower + upper);
            return Ok(PairSolution { beta1: b1, beta2: pair.partner(b1), fallback: false });
        }
        (upper, lower)
    };
    let b1 = newton_bisect(eval, lo, hi, 0.5 * (lo + hi), NEWTON_RTOL)?;
    Ok(PairSolution { beta1: b1, beta2: pair.partner(b1), fallback: false })
}

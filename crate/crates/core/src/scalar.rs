//! Scalar building blocks of the line and pair solvers: a lazily sorted
//! descending prefix and a bracketed Newton root finder.

use std::borrow::Cow;

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// The view as a slice, copying only when it is strided.
pub(crate) fn contiguous<'a>(v: &'a ArrayView1<'_, f64>) -> Cow<'a, [f64]> {
    match v.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(v.to_vec()),
    }
}

/// `max_k (a_k − b_k)`, or `None` when some difference is NaN or `+∞`.
pub(crate) fn max_difference(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut top = f64::NEG_INFINITY;
    let mut bad = false;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        bad |= d.is_nan() | (d == f64::INFINITY);
        top = top.max(d);
    }
    (!bad).then_some(top)
}

/// The differences `a_k − b_k` that exceed `cut`.
pub(crate) fn differences_above(a: &[f64], b: &[f64], cut: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).filter(|&d| d > cut).collect()
}

/// Values sorted in descending order on demand.
///
/// Only the prefix that a scan actually touches is sorted: the first `k`
/// entries are produced by a partial selection followed by a sort of the
/// selected block, and the block size doubles on each extension. Equal
/// values are interchangeable, so the prefix sums do not depend on how ties
/// are ordered.
pub(crate) struct DescendingPrefix {
    values: Vec<f64>,
    sorted: usize,
    sums: Vec<f64>,
}

impl DescendingPrefix {
    pub(crate) fn new(values: Vec<f64>) -> Self {
        let cap = values.len() + 1;
        let mut sums = Vec::with_capacity(cap.min(64));
        sums.push(0.0);
        Self { values, sorted: 0, sums }
    }

    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    fn ensure(&mut self, k: usize) {
        let len = self.values.len();
        let k = k.min(len);
        if k <= self.sorted {
            return;
        }
        let want = k.max(2 * self.sorted).max(8).min(len);
        let take = want - self.sorted;
        let tail = &mut self.values[self.sorted..];
        if take < tail.len() {
            tail.select_nth_unstable_by(take - 1, |a, b| b.total_cmp(a));
        }
        tail[..take].sort_by(|a, b| b.total_cmp(a));
        for idx in self.sorted..want {
            let last = *self.sums.last().unwrap_or(&0.0);
            self.sums.push(last + self.values[idx]);
        }
        self.sorted = want;
    }

    /// The `i`-th largest value (0-based).
    pub(crate) fn get(&mut self, i: usize) -> f64 {
        self.ensure(i + 1);
        self.values[i]
    }

    /// Sum of the `k` largest values.
    pub(crate) fn prefix_sum(&mut self, k: usize) -> f64 {
        self.ensure(k);
        self.sums[k]
    }

    /// `Σ_j (x + v_j)⁺ − (k x + prefix_sum(k))`: the correction that turns
    /// the truncated sum over the top `k` values into the exact positive-part
    /// sum. The active boundary is located by galloping from `k`, so only
    /// `O(log)` entries past it are visited.
    pub(crate) fn positive_part_correction(&mut self, k: usize, x: f64) -> f64 {
        let k = k.min(self.len());
        self.ensure(k);
        // Entries inside the top k that are not active.
        let start = self.values[..k].partition_point(|&v| x + v >= 0.0);
        let mut corr = -((k - start) as f64 * x + (self.sums[k] - self.sums[start]));
        // Active entries past k.
        let end = self.active_end(k, x);
        if end > k {
            corr += (end - k) as f64 * x + (self.sums[end] - self.sums[k]);
        }
        corr
    }

    /// First index `≥ k` whose value `v` has `x + v ≤ 0`, or `len`.
    fn active_end(&mut self, k: usize, x: f64) -> usize {
        let len = self.len();
        let (mut lo, mut step) = (k, 1usize);
        let hi = loop {
            let probe = lo + step - 1;
            if probe >= len {
                break len;
            }
            if x + self.get(probe) <= 0.0 {
                break probe;
            }
            lo = probe + 1;
            step *= 2;
        };
        self.ensure(hi);
        lo + self.values[lo..hi].partition_point(|&v| x + v > 0.0)
    }

    /// `Σ_j (x + v_j)⁺` computed from the top of the order.
    pub(crate) fn positive_part_sum(&mut self, x: f64) -> f64 {
        let end = self.active_end(0, x);
        end as f64 * x + self.sums[end]
    }
}

/// One evaluation of an increasing scalar function.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Eval {
    pub value: f64,
    pub slope: f64,
    /// Magnitude the residual is compared against.
    pub scale: f64,
}

const MAX_ROOT_STEPS: usize = 400;

/// Root of an increasing function on `(lo, hi)` with `f(lo) ≤ 0 ≤ f(hi)`.
///
/// Newton steps are taken from `x0` and replaced by bisection whenever they
/// leave the current bracket. The endpoints themselves are never evaluated,
/// so open domains are fine. Stops when `|f| ≤ rtol · scale` or when the
/// bracket can no longer be split, returning the best point seen.
pub(crate) fn newton_bisect<F>(mut f: F, mut lo: f64, mut hi: f64, x0: f64, rtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<Eval>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Bracket(format!("invalid bracket [{lo}, {hi}]")));
    }
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_ROOT_STEPS {
        let e = f(x)?;
        if e.value.is_nan() {
            return Err(Error::Domain(format!("non-finite residual at {x}")));
        }
        if e.value.abs() < best.0 {
            best = (e.value.abs(), x);
        }
        if e.value.abs() <= rtol * e.scale {
            return Ok(x);
        }
        if e.value < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(best.1);
        }
        let newton = x - e.value / e.slope;
        x = if e.value.is_finite() && e.slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            mid
        };
    }
    Ok(best.1)
}

//! Generators shared by the property suites.
#![allow(dead_code)]

use ndarray::Array2;
use proptest::prelude::*;
use regot::{CostMatrix, Histogram, RegularizerSpec};

pub fn histogram(n: usize) -> impl Strategy<Value = Histogram> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| Histogram::from_weights(w).unwrap())
}

pub fn matrix(n: usize, m: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(lo..hi, n * m)
        .prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap())
}

pub fn cost(n: usize, m: usize) -> impl Strategy<Value = CostMatrix> {
    matrix(n, m, 0.0, 1.0).prop_map(|c| CostMatrix::new(c).unwrap())
}

/// A random plan with full support.
pub fn plan_matrix(n: usize, m: usize) -> impl Strategy<Value = Array2<f64>> {
    matrix(n, m, 0.05, 1.0).prop_map(|a| {
        let s = a.sum();
        a / s
    })
}

pub fn specs() -> Vec<RegularizerSpec> {
    vec![
        RegularizerSpec::entropic(0.7).unwrap(),
        RegularizerSpec::quadratic(1.3).unwrap(),
        RegularizerSpec::tsallis(0.9, 0.5).unwrap(),
        RegularizerSpec::tsallis(0.9, 2.5).unwrap(),
    ]
}

/// Squared distances between `n` evenly spaced points of [0, 1].
pub fn line_cost(n: usize) -> CostMatrix {
    let x = |i: usize| i as f64 / (n - 1) as f64;
    CostMatrix::new(Array2::from_shape_fn((n, n), |(i, j)| (x(i) - x(j)).powi(2))).unwrap()
}

pub fn inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

//! Entropic barycenter by iterated kernel scaling (Benamou et al.).

use ndarray::{Array1, Array2};

use super::BarycenterRecord;
use crate::error::{Error, Result};
use crate::parallel::try_map_indices;
use crate::transport::{checked_ratio, GibbsKernel};
use crate::types::{BarycenterProblem, Histogram, SolverConfig};

/// Output of [`entropic_barycenter`].
#[derive(Debug, Clone, PartialEq)]
pub struct EntropicBarycenterOutput {
    pub barycenter: Histogram,
    /// Scalings `(u^k, v^k)`; plan `k` is `diag(u^k) K diag(v^k)`.
    pub scalings: Vec<(Array1<f64>, Array1<f64>)>,
    pub trace: Vec<BarycenterRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl EntropicBarycenterOutput {
    pub fn plans(&self, kernel: &GibbsKernel) -> Vec<Array2<f64>> {
        self.scalings.iter().map(|(u, v)| kernel.scaled_plan(u, v)).collect()
    }
}

/// Scaling iteration for the entropic barycenter:
///
/// ```text
/// u^k ← p^k / (K v^k)
/// q̃   ← Π_k (Kᵀ u^k)^{r_k}
/// v^k ← q̃ / (Kᵀ u^k)
/// ```
///
/// `q̃` is left unnormalized between sweeps and normalized on output. Zero
/// entries of an input give zero scalings on that row. A denominator that
/// vanishes where it is needed is reported as an underflow.
pub fn entropic_barycenter(
    kernel: &GibbsKernel,
    problem: &BarycenterProblem,
    cfg: &SolverConfig,
) -> Result<EntropicBarycenterOutput> {
    cfg.validate()?;
    let n = problem.support_size();
    if kernel.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n} kernel"),
            got: format!("{:?}", kernel.dim()),
        });
    }
    let nk = problem.len();
    let weights = problem.weights();
    let mut v: Vec<Array1<f64>> = vec![Array1::ones(n); nk];
    let mut kv = kernel.apply_many(&v, cfg.parallel);
    let mut u: Vec<Array1<f64>> = vec![Array1::zeros(n); nk];
    let mut qt = Array1::zeros(n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        u = try_map_indices(nk, cfg.parallel, |k| {
            checked_ratio(problem.inputs()[k].values(), &kv[k], "row")
        })?;
        let ktu = kernel.apply_t_many(&u, cfg.parallel);
        // Every column receives mass in exact arithmetic; a zero here is the
        // kernel underflowing, and the geometric mean would turn it into 0/0.
        for col in &ktu {
            if let Some(index) = col.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::Underflow { axis: "column", index });
            }
        }
        for j in 0..n {
            let mut log_mean = 0.0;
            for k in 0..nk {
                log_mean += weights[k] * ktu[k][j].ln();
            }
            qt[j] = log_mean.exp();
        }
        for k in 0..nk {
            v[k] = &qt / &ktu[k];
            if let Some(index) = v[k].iter().position(|x| !x.is_finite()) {
                return Err(Error::Underflow { axis: "column", index });
            }
        }
        kv = kernel.apply_many(&v, cfg.parallel);
        iterations += 1;

        let row_errs: Vec<f64> = (0..nk)
            .map(|k| {
                let p = problem.inputs()[k].values();
                (0..n).map(|i| (u[k][i] * kv[k][i] - p[i]).abs()).sum()
            })
            .collect();
        let mut consensus: f64 = 0.0;
        let mut beta_res: f64 = 0.0;
        for j in 0..n {
            let c0 = v[0][j] * ktu[0][j];
            let mut wsum = 0.0;
            for k in 0..nk {
                consensus = consensus.max((v[k][j] * ktu[k][j] - c0).abs());
                if v[k][j] > 0.0 {
                    wsum += weights[k] * v[k][j].ln();
                }
            }
            beta_res = beta_res.max(wsum.abs());
        }
        let worst = row_errs.iter().copied().fold(consensus, f64::max);
        trace.push(BarycenterRecord {
            iter: iterations,
            row_errs,
            consensus_err: consensus,
            beta_residual: beta_res,
            fallbacks: 0,
        });
        converged = worst <= cfg.tol;
        if converged && !cfg.fixed_iterations {
            break;
        }
    }
    if cfg.strict && !converged {
        let residual = trace.last().map_or(f64::INFINITY, BarycenterRecord::residual);
        return Err(Error::NotConverged { iterations, residual });
    }
    let barycenter = Histogram::from_weights(qt.to_vec())?;
    Ok(EntropicBarycenterOutput {
        barycenter,
        scalings: u.into_iter().zip(v).collect(),
        trace,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CostMatrix;
    use ndarray::array;

    #[test]
    fn single_point_collapses() {
        let k = GibbsKernel::new(array![[0.7]]).unwrap();
        let h = Histogram::uniform(1).unwrap();
        let prob = BarycenterProblem::new(vec![h.clone(), h], vec![0.5, 0.5]).unwrap();
        let out = entropic_barycenter(&k, &prob, &SolverConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.barycenter.values(), &[1.0]);
    }

    #[test]
    fn duplicated_input_matches_single_input() {
        let c = CostMatrix::new(array![[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]]).unwrap();
        let k = GibbsKernel::from_cost(&c, 1.0).unwrap();
        let p = Histogram::new(vec![0.2, 0.5, 0.3]).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-13);
        let two = BarycenterProblem::new(vec![p.clone(), p.clone()], vec![0.5, 0.5]).unwrap();
        let one = BarycenterProblem::new(vec![p], vec![1.0]).unwrap();
        let a = entropic_barycenter(&k, &two, &cfg).unwrap();
        let b = entropic_barycenter(&k, &one, &cfg).unwrap();
        assert_eq!(a.scalings[0], a.scalings[1]);
        for (x, y) in a.barycenter.values().iter().zip(b.barycenter.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn vanished_column_is_an_underflow() {
        let k = GibbsKernel::new(array![[1.0, 0.0], [1.0, 0.0]]).unwrap();
        let h = Histogram::uniform(2).unwrap();
        let prob = BarycenterProblem::new(vec![h], vec![1.0]).unwrap();
        let err = entropic_barycenter(&k, &prob, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Underflow { axis: "column", index: 1 }), "{err}");
    }
}

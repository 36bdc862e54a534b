//! Properties of the barycenter solvers.

mod common;

use common::{histogram, line_cost, max_abs_diff};
use proptest::prelude::*;
use regot::barycenter::BarycenterSolver;
use regot::{
    entropic_barycenter, generalized_barycenter, subgradient_divergence, BarycenterProblem,
    GibbsKernel, Histogram, RegularizerSpec, SolverConfig,
};

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn l1(a: &Histogram, b: &Histogram) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_and_generalized_entropic_barycenters_agree(
        inputs in prop::collection::vec(histogram(10), 3),
        r in weights(3),
        lambda in 0.2f64..1.0,
        log_domain in any::<bool>(),
    ) {
        let c = line_cost(10);
        let prob = BarycenterProblem::new(inputs, r).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-11);
        let k = GibbsKernel::from_cost(&c, lambda).unwrap();
        let scaling = entropic_barycenter(&k, &prob, &cfg).unwrap();
        let spec = RegularizerSpec::entropic(lambda).unwrap();
        let dual = generalized_barycenter(&spec, &c, &prob, &cfg.with_log_domain(log_domain)).unwrap();
        prop_assert!(scaling.converged && dual.converged);
        prop_assert!(l1(&scaling.barycenter, &dual.barycenter) <= 1e-8);
    }

    #[test]
    fn barycenter_is_invariant_under_input_order(
        inputs in prop::collection::vec(histogram(8), 3),
        r in weights(3),
        quadratic in any::<bool>(),
    ) {
        let c = line_cost(8);
        let spec = if quadratic {
            RegularizerSpec::quadratic(2.0).unwrap()
        } else {
            RegularizerSpec::entropic(0.3).unwrap()
        };
        let cfg = SolverConfig::default().with_tol(1e-13).with_max_iters(100_000);
        let a = generalized_barycenter(&spec, &c, &BarycenterProblem::new(inputs.clone(), r.clone()).unwrap(), &cfg).unwrap();
        let order = [2, 0, 1];
        let permuted = BarycenterProblem::new(
            order.iter().map(|&k| inputs[k].clone()).collect(),
            order.iter().map(|&k| r[k]).collect(),
        ).unwrap();
        let b = generalized_barycenter(&spec, &c, &permuted, &cfg).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(max_abs_diff(a.barycenter.values(), b.barycenter.values()) <= 1e-10);
    }

    #[test]
    fn lifted_divergence_decreases_across_sweeps(
        inputs in prop::collection::vec(histogram(8), 3),
        r in weights(3),
        quadratic in any::<bool>(),
    ) {
        let c = line_cost(8);
        let spec = if quadratic {
            RegularizerSpec::quadratic(2.0).unwrap()
        } else {
            RegularizerSpec::entropic(0.3).unwrap()
        };
        let prob = BarycenterProblem::new(inputs, r).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-13).with_max_iters(100_000);
        let mut reference = BarycenterSolver::new(&spec, &c, &prob, &cfg).unwrap();
        let reference_out = generalized_barycenter(&spec, &c, &prob, &cfg).unwrap();
        prop_assert!(reference_out.converged);
        for _ in 0..reference_out.iterations {
            reference.step().unwrap();
        }
        let refs: Vec<_> = (0..3).map(|k| reference.plan(k).unwrap()).collect();
        let mut solver = BarycenterSolver::new(&spec, &c, &prob, &SolverConfig::default()).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            solver.step().unwrap();
            let d: f64 = (0..3)
                .map(|k| {
                    prob.weights()[k]
                        * subgradient_divergence(&spec, &c, refs[k].view(), &solver.potentials()[k]).unwrap()
                })
                .sum();
            prop_assert!(d <= prev + 1e-9, "{spec:?}: {d} after {prev}");
            prev = d;
        }
    }

    #[test]
    fn pair_solves_keep_the_weighted_beta_sum_at_zero(
        inputs in prop::collection::vec(histogram(6), 4),
        r in weights(4),
        sweeps in 1usize..10,
    ) {
        let c = line_cost(6);
        for spec in [RegularizerSpec::entropic(0.5).unwrap(), RegularizerSpec::quadratic(1.0).unwrap()] {
            let prob = BarycenterProblem::new(inputs.clone(), r.clone()).unwrap();
            let mut solver = BarycenterSolver::new(&spec, &c, &prob, &SolverConfig::default()).unwrap();
            for _ in 0..sweeps {
                solver.step().unwrap();
                let (_, rec) = solver.measure().unwrap();
                prop_assert!(rec.beta_residual <= 1e-9, "{spec:?} {}", rec.beta_residual);
            }
        }
    }
}

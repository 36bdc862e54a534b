//! Properties of the transport solvers and the exact oracle.

mod common;

use common::{cost, histogram, line_cost, max_abs_diff, specs};
use ndarray::Array2;
use proptest::prelude::*;
use regot::{
    col_projection, exact_transport, plan_from_potentials, row_projection, solve_transport,
    theta_residual, transport_cost, CostMatrix, DualPotentials, GibbsKernel, Histogram,
    RegularizerSpec, SolverConfig, TransportPlan,
};

fn l1(a: impl Iterator<Item = f64>, b: &[f64]) -> f64 {
    a.zip(b).map(|(x, y)| (x - y).abs()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_hit_their_marginal(
        p in histogram(5),
        q in histogram(4),
        c in cost(5, 4),
        a0 in prop::collection::vec(-1.0f64..0.0, 5),
        b0 in prop::collection::vec(-1.0f64..0.0, 4),
    ) {
        let cfg = SolverConfig::default();
        for spec in specs() {
            let mut pot = DualPotentials::new(a0.clone().into(), b0.clone().into()).unwrap();
            pot.alpha = row_projection(&spec, &c, &pot, &p, &cfg).unwrap();
            let a = plan_from_potentials(&spec, &c, &pot).unwrap();
            prop_assert!(l1(a.rows().into_iter().map(|r| r.sum()), p.values()) <= 1e-10, "{spec:?}");
            pot.beta = col_projection(&spec, &c, &pot, &q, &cfg).unwrap();
            let a = plan_from_potentials(&spec, &c, &pot).unwrap();
            prop_assert!(l1(a.columns().into_iter().map(|r| r.sum()), q.values()) <= 1e-10, "{spec:?}");
        }
    }

    #[test]
    fn converged_results_are_consistent(p in histogram(6), q in histogram(5), c in cost(6, 5)) {
        let tol = 1e-10;
        let cfg = SolverConfig::default().with_tol(tol);
        for spec in specs() {
            let out = solve_transport(&spec, &c, &p, &q, &cfg).unwrap();
            prop_assert!(out.converged);
            let rebuilt = plan_from_potentials(&spec, &c, &out.potentials).unwrap();
            prop_assert!(max_abs_diff(rebuilt.iter(), out.plan.view().iter()) <= 1e-12);
            prop_assert!(theta_residual(&spec, &c, &out.plan).unwrap() <= 10.0 * tol, "{spec:?}");
            let last = out.trace.last().unwrap();
            if let Some(dual) = last.dual {
                prop_assert!(last.primal - dual <= 10.0 * tol, "{spec:?}");
            }
            for r in &out.trace {
                prop_assert!(r.row_err >= 0.0 && r.col_err >= 0.0);
                if let Some(dual) = r.dual {
                    prop_assert!(r.primal - dual >= -1e-9, "{spec:?} iter {}", r.iter);
                }
            }
        }
    }

    #[test]
    fn entropic_iterates_are_diagonal_scalings_of_the_kernel(
        p in histogram(5),
        q in histogram(5),
        c in cost(5, 5),
        lambda in 0.2f64..2.0,
        sweeps in 1usize..20,
    ) {
        let spec = RegularizerSpec::entropic(lambda).unwrap();
        let out = solve_transport(&spec, &c, &p, &q, &SolverConfig::default().fixed(sweeps)).unwrap();
        let k = GibbsKernel::from_cost(&c, lambda).unwrap();
        let u = out.potentials.alpha.mapv(|a| (a / lambda).exp());
        let v = out.potentials.beta.mapv(|b| (b / lambda).exp());
        let scaled = k.scaled_plan(&u, &v);
        for (x, y) in scaled.iter().zip(out.plan.view().iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn solutions_are_permutation_equivariant(
        p in histogram(5),
        q in histogram(4),
        c in cost(5, 4),
        rot in 0usize..5,
    ) {
        let perm: Vec<usize> = (0..5).map(|i| (i + rot) % 5).collect();
        let pp = Histogram::new(perm.iter().map(|&i| p.values()[i]).collect()).unwrap();
        let cp = CostMatrix::new(Array2::from_shape_fn((5, 4), |(i, j)| c.view()[[perm[i], j]])).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-12);
        for spec in specs() {
            let a = solve_transport(&spec, &c, &p, &q, &cfg).unwrap();
            let b = solve_transport(&spec, &cp, &pp, &q, &cfg).unwrap();
            let permuted = Array2::from_shape_fn((5, 4), |(i, j)| a.plan.view()[[perm[i], j]]);
            prop_assert!(max_abs_diff(permuted.iter(), b.plan.view().iter()) <= 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn regularized_plans_cost_at_least_the_exact_optimum(p in histogram(4), q in histogram(4), c in cost(4, 4)) {
        let w = exact_transport(&c, &p, &q).unwrap().value;
        let cfg = SolverConfig::default().with_tol(1e-12);
        for spec in specs() {
            let out = solve_transport(&spec, &c, &p, &q, &cfg).unwrap();
            let rounded = regot::measures::round_to_marginals(out.plan.view(), &p, &q);
            let value = transport_cost(&TransportPlan::new(rounded).unwrap(), &c).unwrap();
            prop_assert!(value >= w - 1e-10, "{spec:?} {value} < {w}");
        }
    }

    #[test]
    fn exact_solutions_are_sparse_feasible_vertices(p in histogram(5), q in histogram(6), c in cost(5, 6)) {
        let sol = exact_transport(&c, &p, &q).unwrap();
        let (r, k) = sol.plan.marginals();
        prop_assert!(max_abs_diff(r.iter(), p.values()) <= 1e-12);
        prop_assert!(max_abs_diff(k.iter(), q.values()) <= 1e-12);
        prop_assert!(sol.plan.nonzeros() < 5 + 6);
        prop_assert!((sol.value - transport_cost(&sol.plan, &c).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn exact_distance_is_symmetric_on_a_metric(p in histogram(6), q in histogram(6)) {
        let c = line_cost(6);
        prop_assert!(exact_transport(&c, &p, &p).unwrap().value.abs() <= 1e-15);
        let pq = exact_transport(&c, &p, &q).unwrap().value;
        let qp = exact_transport(&c, &q, &p).unwrap().value;
        prop_assert!((pq - qp).abs() <= 1e-12);
    }
}

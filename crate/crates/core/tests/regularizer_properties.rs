//! Properties of the regularizers and of the plan measures.

mod common;

use common::{cost, inner, matrix, plan_matrix, specs};
use ndarray::Array2;
use proptest::prelude::*;
use regot::{
    bregman_divergence, conjugate, gradient, kl_divergence, potential, shannon_entropy,
    tsallis_entropy, CostMatrix, RegularizerSpec, TransportPlan,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(a in matrix(3, 4, 0.1, 2.0), c in cost(3, 4)) {
        for spec in specs() {
            let g = gradient(&spec, &c, a.view()).unwrap();
            let h = 1e-6;
            for ((i, j), &gij) in g.indexed_iter() {
                let (mut up, mut dn) = (a.clone(), a.clone());
                up[[i, j]] += h;
                dn[[i, j]] -= h;
                let fd = (potential(&spec, &c, up.view()).unwrap()
                    - potential(&spec, &c, dn.view()).unwrap())
                    / (2.0 * h);
                prop_assert!((fd - gij).abs() <= 1e-5 * gij.abs().max(1.0), "{spec:?} {fd} {gij}");
            }
        }
    }

    #[test]
    fn young_fenchel_inequality_and_equality(
        a in matrix(3, 3, 0.05, 0.5),
        u in matrix(3, 3, -2.0, 2.0),
        c in cost(3, 3),
    ) {
        for spec in [RegularizerSpec::entropic(0.8).unwrap(), RegularizerSpec::quadratic(1.5).unwrap()] {
            let phi = potential(&spec, &c, a.view()).unwrap();
            let star = conjugate(&spec, &c, u.view()).unwrap().unwrap();
            prop_assert!(phi + star >= inner(&a, &u) - 1e-10);
            let s = gradient(&spec, &c, a.view()).unwrap();
            let star_s = conjugate(&spec, &c, s.view()).unwrap().unwrap();
            let expected = inner(&a, &s) - phi;
            prop_assert!((star_s - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn tsallis_term_is_one_homogeneous_with_euler_identity(
        a in matrix(3, 3, 0.05, 0.5),
        q in prop_oneof![0.2f64..0.9, 1.1f64..3.0],
        t in prop::sample::select(vec![0.5, 2.0, 10.0]),
    ) {
        let spec = RegularizerSpec::tsallis(1.0, q).unwrap();
        let zero = CostMatrix::zeros(3, 3).unwrap();
        let f = potential(&spec, &zero, a.view()).unwrap();
        let ta = &a * t;
        let ft = potential(&spec, &zero, ta.view()).unwrap();
        prop_assert!((ft - t * f).abs() <= 1e-10 * (t * f).abs().max(1.0));
        let g = gradient(&spec, &zero, a.view()).unwrap();
        prop_assert!((inner(&a, &g) - f).abs() <= 1e-10 * f.abs().max(1.0));
        let gt = gradient(&spec, &zero, ta.view()).unwrap();
        for (x, y) in g.iter().zip(gt.iter()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn tsallis_index_two_is_quadratic_up_to_a_constant(
        a in plan_matrix(3, 4),
        c in cost(3, 4),
        lambda in 0.1f64..5.0,
    ) {
        let t = potential(&RegularizerSpec::tsallis(lambda, 2.0).unwrap(), &c, a.view()).unwrap();
        let q = potential(&RegularizerSpec::quadratic(2.0 * lambda).unwrap(), &c, a.view()).unwrap();
        prop_assert!((t - (q - lambda)).abs() <= 1e-12 * q.abs().max(1.0));
    }

    #[test]
    fn divergences_are_nonnegative_and_entropic_matches_kl(
        a in plan_matrix(3, 4),
        b in plan_matrix(3, 4),
        lambda in 0.1f64..3.0,
    ) {
        let (p, q) = (TransportPlan::new(a).unwrap(), TransportPlan::new(b).unwrap());
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        for spec in specs() {
            prop_assert!(bregman_divergence(&spec, &p, &q).unwrap() >= -1e-12, "{spec:?}");
        }
        let d = bregman_divergence(&RegularizerSpec::entropic(lambda).unwrap(), &p, &q).unwrap();
        prop_assert!((d - lambda * kl).abs() <= 1e-10 * (lambda * kl).max(1e-300));
    }

    #[test]
    fn entropies_are_bounded_by_the_uniform_plan(a in plan_matrix(3, 4), q in 0.2f64..3.0) {
        prop_assume!((q - 1.0).abs() > 1e-3);
        let p = TransportPlan::new(a).unwrap();
        let h = shannon_entropy(&p);
        prop_assert!((0.0..=12f64.ln() + 1e-12).contains(&h));
        let u = TransportPlan::new(Array2::from_elem((3, 4), 1.0 / 12.0)).unwrap();
        prop_assert!(tsallis_entropy(&p, q).unwrap() <= tsallis_entropy(&u, q).unwrap() + 1e-12);
    }
}

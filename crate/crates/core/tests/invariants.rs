mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::*;
use cylscale::circulant::{gram_sum, BlockCirculantOp, GramTerm};
use cylscale::model::Objective;
use cylscale::ops::{masked_scaled_direction, LinOp};
use cylscale::scaling::{build_scaling, Metric};
use cylscale::solvers::{binding_set, pg_norm, project, solve_lbfgsb, solve_spg, solve_tron, SolveResult, SolverConfig, StepKind};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bc_from_seed(seed: u64, n_b: usize, s: usize) -> BlockCirculantOp {
    let mut r = rng(seed);
    let blocks: Vec<DMatrix<f64>> = (0..n_b).map(|_| DMatrix::from_fn(s, s, |_, _| r.random_range(-1.0..1.0))).collect();
    BlockCirculantOp::from_dense_blocks(&blocks).unwrap()
}

fn spd_bc(seed: u64, n_b: usize, s: usize) -> BlockCirculantOp {
    let b = bc_from_seed(seed, n_b, s);
    let id = BlockCirculantOp::identity(n_b, s).unwrap();
    let ones = vec![1.0; s];
    gram_sum(&[
        GramTerm { op: &b, weights: &ones, coeff: 1.0 },
        GramTerm { op: &id, weights: &ones, coeff: 0.1 },
    ])
    .unwrap()
}

fn check_solve(res: &SolveResult, monotone: bool) -> Result<(), TestCaseError> {
    prop_assert!(res.x.iter().all(|&v| v >= 0.0));
    let recs = res.trace.records();
    prop_assert!(recs.windows(2).all(|w| w[0].iter < w[1].iter || w[1].step_kind == StepKind::Rejected));
    prop_assert!(recs.windows(2).all(|w| w[0].cg_cum <= w[1].cg_cum));
    prop_assert!(recs.iter().all(|t| t.pg_norm >= 0.0));
    if monotone {
        prop_assert!(recs.windows(2).all(|w| w[1].f <= w[0].f));
    } else {
        prop_assert!(res.f <= recs[0].f);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_feasible(x in prop::collection::vec(-1e3..1e3f64, 0..40)) {
        let p = project(&x);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(project(&p), p.clone());
        for (a, b) in x.iter().zip(&p) {
            prop_assert!(*a < 0.0 || a == b);
        }
    }

    #[test]
    fn projected_gradient_vanishes_only_at_kkt_points(
        x in prop::collection::vec(prop_oneof![Just(0.0), 0.0..10.0f64], 1..20),
        g in prop::collection::vec(-5.0..5.0f64, 20),
    ) {
        let g = &g[..x.len()];
        let kkt = x.iter().zip(g).all(|(&xi, &gi)| gi == 0.0 || (xi == 0.0 && gi > 0.0));
        prop_assert_eq!(pg_norm(&x, g) == 0.0, kkt);
    }

    #[test]
    fn bc_adjoint_matches_transpose(seed in any::<u64>(), n_b in 1usize..10, s in 1usize..5) {
        let op = bc_from_seed(seed, n_b, s);
        let mut r = rng(seed ^ 1);
        let u = rand_vec(&mut r, n_b * s, -1.0, 1.0);
        let v = rand_vec(&mut r, n_b * s, -1.0, 1.0);
        let lhs = dot(&op.apply(&u), &v);
        let rhs = dot(&u, &op.apply_adjoint(&v));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn scaling_is_symmetric_positive_definite(seed in any::<u64>(), n_b in 1usize..10, s in 1usize..5) {
        let sc = build_scaling(&spd_bc(seed, n_b, s)).unwrap();
        let mut r = rng(seed ^ 2);
        let u = rand_vec(&mut r, n_b * s, -1.0, 1.0);
        let v = rand_vec(&mut r, n_b * s, -1.0, 1.0);
        let cu = sc.apply_c(&u).unwrap();
        let cv = sc.apply_c(&v).unwrap();
        prop_assert!((dot(&cu, &v) - dot(&u, &cv)).abs() <= 1e-10);
        prop_assert!(dot(&u, &sc.apply_p(&u).unwrap()) > 0.0);
        let back = sc.apply_cinv(&cu).unwrap();
        prop_assert!(max_abs_diff(&back, &u) <= 1e-10);
    }

    #[test]
    fn masked_direction_is_descent_and_respects_binding(seed in any::<u64>(), n in 1usize..12) {
        let mut r = rng(seed);
        let metric = random_metric(&mut r, n);
        let x: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 0.0 } else { r.random_range(0.0..2.0) }).collect();
        let g = rand_vec(&mut r, n, -1.0, 1.0);
        let binding = binding_set(&x, &g);
        let d = masked_scaled_direction(&metric, &g, &binding).unwrap();
        for i in 0..n {
            if binding[i] {
                prop_assert_eq!(d[i], 0.0);
            }
        }
        prop_assert!(dot(&g, &d) <= 1e-14);
    }

    #[test]
    fn solvers_stay_feasible_and_descend(seed in any::<u64>(), n in 1usize..10, scaled in any::<bool>()) {
        let mut r = rng(seed);
        let p = random_bound_quadratic(&mut r, n);
        let metric = random_metric(&mut r, n);
        let x0 = rand_vec(&mut r, n, -1.0, 2.0);
        let m: Option<&dyn Metric> = if scaled { Some(&metric) } else { None };
        let cfg = SolverConfig { max_iter: 50, ..SolverConfig::default() };
        check_solve(&solve_lbfgsb(&p.f, &x0, &cfg, m).unwrap(), true)?;
        check_solve(&solve_tron(&p.f, &x0, &cfg, m).unwrap(), true)?;
        check_solve(&solve_spg(&p.f, &x0, &cfg, m).unwrap(), false)?;
        let res = solve_tron(&p.f, &x0, &cfg, m).unwrap();
        prop_assert_eq!(res.f, p.f.eval_f(&res.x));
    }
}

//! Property tests against independent oracles: active-set enumeration for
//! the QP, vertex enumeration for support functions, and sampled disturbance
//! rollouts for the robust MPC certificate.

use armpc::geometry::{Hyperbox, Polytope};
use armpc::invariant::max_rpi;
use armpc::mpc::{rollout, rollout_violation, solve, FeedbackMode, RobustMpcProblem};
use armpc::optimization::{dlqr, solve_qp, QuadraticProgram};
use armpc::simulation::rng_for;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn vec_strategy(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(lo..hi, n)
}

/// Minimizes `½zᵀHz + gᵀz` s.t. `Az ≤ b` by enumerating every active set.
fn qp_by_active_sets(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let n = h.nrows();
    let m = a.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        if act.len() > n {
            continue;
        }
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-g));
        for (j, &i) in act.iter().enumerate() {
            for c in 0..n {
                kkt[(n + j, c)] = a[(i, c)];
                kkt[(c, n + j)] = a[(i, c)];
            }
            rhs[n + j] = b[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let z = sol.rows(0, n).into_owned();
        if sol.rows(n, k).iter().any(|&l| l < -1e-9) || (a * &z - b).iter().any(|&r| r > 1e-9) {
            continue;
        }
        let f = 0.5 * z.dot(&(h * &z)) + g.dot(&z);
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((z, f));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_minkowski_then_pontryagin_is_identity(c1 in vec_strategy(3, -2.0, 2.0), h1 in vec_strategy(3, 0.0, 2.0), c2 in vec_strategy(3, -2.0, 2.0), h2 in vec_strategy(3, 0.0, 2.0)) {
        let a = Hyperbox::new(DVector::from_vec(c1), DVector::from_vec(h1)).unwrap();
        let b = Hyperbox::new(DVector::from_vec(c2), DVector::from_vec(h2)).unwrap();
        let back = a.minkowski_sum(&b).unwrap().pontryagin_diff(&b).unwrap();
        prop_assert!((back.center() - a.center()).amax() <= 1e-12);
        prop_assert!((back.half_widths() - a.half_widths()).amax() <= 1e-12);
    }

    #[test]
    fn polytope_support_matches_its_vertices(h in vec_strategy(2, 0.5, 2.0), extra in vec_strategy(3, -1.0, 1.0), dir in vec_strategy(2, -1.0, 1.0)) {
        let mut p = Hyperbox::symmetric(DVector::from_vec(h)).unwrap().to_polytope();
        let cut = Polytope::new(DMatrix::from_row_slice(1, 2, &extra[..2]), DVector::from_element(1, extra[2].abs() + 0.1)).unwrap();
        p = p.intersect(&cut).unwrap();
        let d = DVector::from_vec(dir);
        let verts = p.vertices().unwrap();
        let oracle = verts.iter().map(|v| d.dot(v)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((p.support(&d).unwrap() - oracle).abs() <= 1e-8);
    }

    #[test]
    fn polytope_plus_box_contains_every_shifted_vertex(h in vec_strategy(2, 0.5, 2.0), q in vec_strategy(2, 0.0, 0.5)) {
        let p = Hyperbox::symmetric(DVector::from_vec(h)).unwrap().to_polytope();
        let qb = Hyperbox::symmetric(DVector::from_vec(q.clone())).unwrap();
        let sum = p.minkowski_sum(&qb).unwrap();
        for v in p.vertices().unwrap() {
            for s in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                let x = &v + DVector::from_row_slice(&[s.0 * q[0], s.1 * q[1]]);
                prop_assert!(sum.max_violation(&x) <= 1e-9);
            }
        }
        prop_assert!(sum.pontryagin_diff(&qb).unwrap().contains_tol(&p, 1e-9));
    }

    #[test]
    fn qp_matches_active_set_enumeration(seed in 0u64..10_000) {
        let mut rng = rng_for(seed);
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=5);
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.2;
        let g = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(0.05..1.0));
        let oracle = qp_by_active_sets(&h, &g, &a, &b).expect("origin is feasible");
        let st = solve_qp(&QuadraticProgram::unconstrained(h, g).with_inequalities(a, b)).unwrap();
        prop_assert!(st.is_optimal());
        prop_assert!((&st.primal - &oracle.0).amax() <= 1e-7, "{} vs {}", st.primal, oracle.0);
        prop_assert!((st.objective - oracle.1).abs() <= 1e-8);
        prop_assert!(st.kkt_residual <= 1e-6);
    }

    #[test]
    fn robust_mpc_solution_survives_sampled_disturbances(seed in 0u64..10_000, x1 in -2.5f64..2.5, x2 in -1.5f64..1.5, fixed in any::<bool>()) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let lqr = dlqr(&a, &b, &q, &r).unwrap();
        let d = Hyperbox::symmetric(DVector::from_element(2, 0.1)).unwrap();
        let x = Hyperbox::symmetric(DVector::from_row_slice(&[4.0, 3.0])).unwrap().to_polytope();
        let u = Hyperbox::symmetric(DVector::from_element(1, 2.0)).unwrap().to_polytope();
        let terminal = max_rpi(&(&a - &b * &lqr.k), &d, &x, &u, &lqr.k).unwrap().unwrap().set;
        let prob = RobustMpcProblem {
            a,
            b,
            horizon: 4,
            q,
            r,
            p: lqr.p,
            k_term: lqr.k.clone(),
            x,
            u,
            d: d.clone(),
            terminal,
            feedback: if fixed { FeedbackMode::Fixed(lqr.k) } else { FeedbackMode::Optimized },
        };
        let x0 = DVector::from_row_slice(&[x1, x2]);
        let sol = solve(&prob, &x0).unwrap();
        prop_assume!(sol.is_optimal());
        let mut rng = rng_for(seed);
        for _ in 0..50 {
            let ds: Vec<DVector<f64>> = (0..4)
                .map(|_| DVector::from_fn(2, |i, _| if rng.random_bool(0.5) { d.upper()[i] } else { d.lower()[i] } * rng.random_range(0.0..=1.0f64).sqrt().max(0.9)))
                .collect();
            let (xs, us) = rollout(&prob, &x0, &sol.nominal_u, &sol.gains, &ds);
            prop_assert!(rollout_violation(&prob, &xs, &us) <= 1e-7);
        }
    }
}

//! Solves one robust MPC problem with affine disturbance feedback and checks
//! the plan against every disturbance vertex sequence.
//!
//! Run with `cargo run --release --example robust_mpc`.

use armpc::geometry::Hyperbox;
use armpc::invariant::max_rpi;
use armpc::mpc::{rollout, rollout_violation, solve, FeedbackMode, RobustMpcProblem};
use armpc::optimization::dlqr;
use nalgebra::{DMatrix, DVector};

fn main() -> armpc::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let (q, r) = (DMatrix::identity(2, 2), DMatrix::identity(1, 1));
    let lqr = dlqr(&a, &b, &q, &r)?;
    let d = Hyperbox::symmetric(DVector::from_element(2, 0.1))?;
    let x = Hyperbox::symmetric(DVector::from_row_slice(&[4.0, 3.0]))?.to_polytope();
    let u = Hyperbox::symmetric(DVector::from_element(1, 2.0))?.to_polytope();
    let terminal = max_rpi(&(&a - &b * &lqr.k), &d, &x, &u, &lqr.k)?.ok_or(armpc::Error::EmptySet)?.set;
    let prob = RobustMpcProblem {
        a,
        b,
        horizon: 3,
        q,
        r,
        p: lqr.p,
        k_term: lqr.k,
        x,
        u,
        d: d.clone(),
        terminal,
        feedback: FeedbackMode::Optimized,
    };
    let x0 = DVector::from_row_slice(&[2.0, 1.0]);
    let sol = solve(&prob, &x0)?;
    println!("status {:?}, objective {:.4}, KKT residual {:.1e}", sol.status, sol.objective, sol.kkt_residual);
    for (k, (xk, uk)) in sol.nominal_x.iter().zip(&sol.nominal_u).enumerate() {
        println!("  k = {k}: nominal x {:.3?} u {:.3?}", xk.as_slice(), uk.as_slice());
    }
    let mut worst = f64::NEG_INFINITY;
    for mask in 0..(1u32 << 6) {
        let ds: Vec<DVector<f64>> = (0..3).map(|k| DVector::from_fn(2, |i, _| if mask >> (2 * k + i) & 1 == 1 { d.upper()[i] } else { d.lower()[i] })).collect();
        let (xs, us) = rollout(&prob, &x0, &sol.nominal_u, &sol.gains, &ds);
        worst = worst.max(rollout_violation(&prob, &xs, &us));
    }
    println!("largest constraint value over all 64 vertex sequences: {worst:.2e} (must be <= 0)");
    Ok(())
}

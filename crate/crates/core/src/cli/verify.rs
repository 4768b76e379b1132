//! Self-checks of the numerical building blocks, grouped into suites.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::config::Config;
use crate::controller::Variant;
use crate::error::{Error, Result};
use crate::estimation::Blr;
use crate::geometry::{Hyperbox, Polytope};
use crate::invariant::{is_rpi, max_rpi};
use crate::mpc::{compile, rollout, solve, FeedbackMode, RobustMpcProblem, RowKind};
use crate::optimization::{chi_square_quantile, dlqr, riccati_residual, solve_qp, QuadraticProgram};
use crate::simulation::{rng_for, shoelace_area, toy_blr, toy_set_membership, ToyProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Estimators,
    Mpc,
    ClosedLoop,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Geometry, Suite::Estimators, Suite::Mpc, Suite::ClosedLoop];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Estimators => "estimators",
            Suite::Mpc => "mpc",
            Suite::ClosedLoop => "closed_loop",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (expected one of geometry, estimators, mpc, closed_loop)"))
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs every check of `suite`.
pub fn verify(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Geometry => geometry(),
        Suite::Estimators => estimators(),
        Suite::Mpc => mpc(),
        Suite::ClosedLoop => closed_loop(),
    }
}

fn random_box<R: Rng>(n: usize, rng: &mut R) -> Result<Hyperbox> {
    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let h = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    Hyperbox::new(c, h)
}

fn geometry() -> Result<Vec<Check>> {
    let mut rng = rng_for(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_box(3, &mut rng)?;
        let b = random_box(3, &mut rng)?;
        let back = a.minkowski_sum(&b)?.pontryagin_diff(&b)?;
        worst = worst.max((back.center() - a.center()).amax()).max((back.half_widths() - a.half_widths()).amax());
    }
    let mut out = vec![check("box (A + B) - B = A", worst <= 1e-12, format!("max error {worst:.1e}"))];

    let square = Hyperbox::symmetric(DVector::from_element(2, 1.0))?.to_polytope();
    let (c, r) = square.chebyshev_center()?;
    out.push(check("chebyshev centre of the unit square", c.amax() <= 1e-9 && (r - 1.0).abs() <= 1e-9, format!("centre {:?} radius {r:.6}", c.as_slice())));
    let verts = square.vertices()?;
    let pts: Vec<(f64, f64)> = crate::simulation::convex_hull(&verts.iter().map(|v| (v[0], v[1])).collect::<Vec<_>>());
    let area = shoelace_area(&pts);
    out.push(check("square vertices and hull area", verts.len() == 4 && (area - 4.0).abs() <= 1e-9, format!("{} vertices, area {area:.6}", verts.len())));

    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let lqr = dlqr(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1))?;
    let a_cl = &a - &b * &lqr.k;
    let d = Hyperbox::symmetric(DVector::from_element(2, 0.05))?;
    let x = Hyperbox::symmetric(DVector::from_row_slice(&[4.0, 3.0]))?.to_polytope();
    let u = Hyperbox::symmetric(DVector::from_element(1, 2.0))?.to_polytope();
    let o = max_rpi(&a_cl, &d, &x, &u, &lqr.k)?;
    let ok = o.as_ref().is_some_and(|o| o.converged && is_rpi(&o.set, &a_cl, &d, &x, &u, &lqr.k));
    out.push(check("maximal RPI set of the double integrator is invariant", ok, format!("converged {}", o.as_ref().is_some_and(|o| o.converged))));

    let empty = Polytope::new(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), DVector::from_row_slice(&[-1.0, -1.0]))?;
    out.push(check("empty polytope is detected", empty.is_empty(), String::new()));
    Ok(out)
}

fn estimators() -> Result<Vec<Check>> {
    let mut rng = rng_for(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = 3;
        let k = rng.random_range(5..40);
        let phis: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))).collect();
        let ys: Vec<DVector<f64>> = phis.iter().map(|p| DVector::from_element(1, p.sum() + rng.random_range(-0.1..0.1))).collect();
        let batch = Blr::from_data(&phis, &ys, 1e-2, &[0.1], 0.05, 1)?;
        let mut rec = Blr::new(vec![DVector::zeros(d)], vec![DMatrix::identity(d, d) * 1e-2], &[0.1], 0.05, 1)?;
        for (p, y) in phis.iter().zip(&ys) {
            rec.update(p, y)?;
        }
        let dm = (&batch.row(0).mean - &rec.row(0).mean).amax();
        let dl = (&batch.row(0).lambda - &rec.row(0).lambda).amax() / batch.row(0).lambda.amax();
        worst = worst.max(dm).max(dl);
    }
    let mut out = vec![check("recursive and batch regression agree", worst <= 1e-9, format!("max difference {worst:.1e}"))];

    let q = chi_square_quantile(2, 0.95);
    out.push(check("chi-square quantile (2 dof, 0.95)", (q - 5.991_464_547).abs() <= 1e-6, format!("{q:.9}")));

    let toy = ToyProblem::default();
    let mut sm_ok = 0;
    let mut covered = 0;
    let runs = 100;
    for seed in 0..runs {
        let data = toy.dataset(50, &mut rng_for(seed));
        let sm = toy_set_membership(&toy, &data)?;
        if sm.collapse.is_none() && sm.radii.windows(2).all(|w| w[1] <= w[0] + 1e-9) {
            sm_ok += 1;
        }
        if toy_blr(&toy, &data, 0.05)?.covered_throughout() {
            covered += 1;
        }
    }
    out.push(check("set membership never collapses and shrinks monotonically", sm_ok == runs, format!("{sm_ok}/{runs}")));
    out.push(check("regression confidence set covers the truth", covered as f64 >= 0.95 * runs as f64, format!("{covered}/{runs}")));
    Ok(out)
}

/// Maximum over the disturbance vertex sequences of every constraint row.
fn enumerate_worst(prob: &RobustMpcProblem, x0: &DVector<f64>, ubar: &[DVector<f64>], gains: &crate::mpc::Gains, kinds: &[RowKind]) -> Vec<f64> {
    let n = prob.state_dim();
    let nh = prob.horizon;
    let lo = prob.d.lower();
    let hi = prob.d.upper();
    let mut worst = vec![f64::NEG_INFINITY; kinds.len()];
    for mask in 0..(1u64 << (n * nh)) {
        let ds: Vec<DVector<f64>> = (0..nh).map(|k| DVector::from_fn(n, |i, _| if mask >> (k * n + i) & 1 == 1 { hi[i] } else { lo[i] })).collect();
        let (xs, us) = rollout(prob, x0, ubar, gains, &ds);
        for (w, kind) in worst.iter_mut().zip(kinds) {
            let v = match *kind {
                RowKind::State { step, row } => prob.x.a().row(row).dot(&xs[step].transpose()),
                RowKind::Input { step, row } => prob.u.a().row(row).dot(&us[step].transpose()),
                RowKind::Terminal { row } => prob.terminal.a().row(row).dot(&xs[nh].transpose()),
            };
            *w = w.max(v);
        }
    }
    worst
}

fn mpc() -> Result<Vec<Check>> {
    let mut rng = rng_for(13);
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let q = DMatrix::identity(2, 2);
    let r = DMatrix::identity(1, 1);
    let lqr = dlqr(&a, &b, &q, &r)?;
    let res = riccati_residual(&a, &b, &q, &r, &lqr.p);
    let mut out = vec![check("riccati residual", res <= 1e-9, format!("{res:.1e}"))];

    let mut kkt = 0.0f64;
    let mut solved = 0;
    for _ in 0..50 {
        let m = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let h = &m * m.transpose() + DMatrix::identity(4, 4) * 0.1;
        let g = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let ai = DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let bi = DVector::from_fn(6, |_, _| rng.random_range(0.1..1.0));
        let st = solve_qp(&QuadraticProgram::unconstrained(h, g).with_inequalities(ai, bi))?;
        if st.is_optimal() {
            solved += 1;
            kkt = kkt.max(st.kkt_residual);
        }
    }
    out.push(check("random strictly convex QPs solve with small KKT residual", solved == 50 && kkt <= 1e-6, format!("{solved}/50 solved, max residual {kkt:.1e}")));

    let d = Hyperbox::symmetric(DVector::from_element(2, 0.05))?;
    let x = Hyperbox::symmetric(DVector::from_row_slice(&[4.0, 3.0]))?.to_polytope();
    let u = Hyperbox::symmetric(DVector::from_element(1, 2.0))?.to_polytope();
    let terminal = max_rpi(&(&a - &b * &lqr.k), &d, &x, &u, &lqr.k)?.ok_or(Error::EmptySet)?.set;
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
        d,
        terminal,
        feedback: FeedbackMode::Optimized,
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x0 = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let ubar: Vec<DVector<f64>> = (0..3).map(|_| DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0))).collect();
        let gains: crate::mpc::Gains = (0..3).map(|k| (0..k).map(|_| DMatrix::from_fn(1, 2, |_, _| rng.random_range(-1.0..1.0))).collect()).collect();
        let c = compile(&prob, &x0)?;
        let z = c.lift(&ubar, &gains);
        let encoded = c.worst_case_values(&z);
        let kinds: Vec<RowKind> = c.rows.iter().map(|t| t.kind).collect();
        let brute = enumerate_worst(&prob, &x0, &ubar, &gains, &kinds);
        worst = encoded.iter().zip(&brute).fold(worst, |w, (e, b)| w.max((e - b).abs()));
    }
    out.push(check("robust rows match disturbance vertex enumeration", worst <= 1e-8, format!("max gap {worst:.1e}")));

    let sol = solve(&prob, &DVector::from_row_slice(&[2.0, 0.0]))?;
    out.push(check("robust MPC solves from a feasible state", sol.is_optimal() && sol.kkt_residual <= 1e-6, format!("{:?}, residual {:.1e}", sol.status, sol.kkt_residual)));
    Ok(out)
}

fn closed_loop() -> Result<Vec<Check>> {
    let mut cfg = Config::default();
    cfg.controller.variants = vec![Variant::AdaptiveA];
    cfg.experiment.seeds = 5;
    let (summary, logs) = super::execute(&cfg, None)?;
    let rows = match summary {
        super::Summary::Control(rows) => rows,
        super::Summary::Toy(_) => unreachable!("default config controls a plant"),
    };
    let r = &rows[0];
    let mut out = vec![
        check("all runs feasible", r.feasible_runs == r.runs, format!("{}/{}", r.feasible_runs, r.runs)),
        check(
            "no constraint, containment or nesting violations",
            r.invariant_failures == 0,
            format!("state {} input {} containment {} nesting {}", r.state_violations, r.input_violations, r.containment_violations, r.nesting_violations),
        ),
    ];
    let (_, again) = super::execute(&cfg, None)?;
    let same = logs.iter().zip(&again).all(|(a, b)| a.hash() == b.hash());
    out.push(check("runs are reproducible from the seed", same && logs.len() == again.len(), format!("{} runs", logs.len())));
    Ok(out)
}

use nalgebra::{DMatrix, DVector};

use super::{SolveKind, SolveStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_iter: usize,
    /// Reduced-cost and pivot tolerance.
    pub tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

/// `min cᵀx  s.t.  A_in x ≤ b_in,  A_eq x = b_eq`, with `x` free.
pub fn solve_lp(
    c: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
) -> Result<SolveStatus> {
    solve_lp_with(c, a_ineq, b_ineq, a_eq, b_eq, &LpOptions::default())
}

/// The LP is solved through its dual, which has one equality row per
/// primal variable. All LPs in this crate have few variables and many
/// rows, so the dual keeps the simplex basis at `n × n`. The primal point is
/// read off the simplex multipliers of the dual.
pub fn solve_lp_with(
    c: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    opts: &LpOptions,
) -> Result<SolveStatus> {
    let n = c.len();
    let m_in = a_ineq.nrows();
    let m_eq = a_eq.nrows();
    if a_ineq.ncols() != n && m_in > 0 || b_ineq.len() != m_in {
        return Err(Error::dim("inequality block does not match cost vector"));
    }
    if a_eq.ncols() != n && m_eq > 0 || b_eq.len() != m_eq {
        return Err(Error::dim("equality block does not match cost vector"));
    }
    let finite = c.iter().chain(a_ineq.iter()).chain(b_ineq.iter()).chain(a_eq.iter()).chain(b_eq.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidArgument("LP data must be finite".into()));
    }

    let ncols = m_in + 2 * m_eq;
    let mut at = DMatrix::zeros(n, ncols);
    let mut cost = DVector::zeros(ncols);
    for i in 0..m_in {
        at.column_mut(i).copy_from(&a_ineq.row(i).transpose());
        cost[i] = b_ineq[i];
    }
    for i in 0..m_eq {
        at.column_mut(m_in + i).copy_from(&a_eq.row(i).transpose());
        at.column_mut(m_in + m_eq + i).copy_from(&(-a_eq.row(i).transpose()));
        cost[m_in + i] = b_eq[i];
        cost[m_in + m_eq + i] = -b_eq[i];
    }
    let rhs = -c;

    let mut iterations = 0;
    let outcome = simplex(&at, &rhs, &cost, opts, &mut iterations);
    let m = m_in + m_eq;
    match outcome {
        StdOutcome::Optimal { y, pi } => {
            let x = pi;
            let mut dual = DVector::zeros(m);
            for i in 0..m_in {
                dual[i] = y[i];
            }
            for i in 0..m_eq {
                dual[m_in + i] = y[m_in + i] - y[m_in + m_eq + i];
            }
            let objective = c.dot(&x);
            let kkt_residual = lp_kkt(c, a_ineq, b_ineq, a_eq, b_eq, &x, &dual);
            Ok(SolveStatus {
                kind: SolveKind::Optimal,
                objective,
                primal: x,
                dual,
                kkt_residual,
                iterations,
            })
        }
        StdOutcome::Unbounded => Ok(SolveStatus::failed(SolveKind::Infeasible, n, m, iterations)),
        StdOutcome::MaxIter => Ok(SolveStatus::failed(SolveKind::MaxIter, n, m, iterations)),
        StdOutcome::Infeasible => {
            // The dual is infeasible: the primal is either infeasible or
            // unbounded. Decide with a zero-cost feasibility problem.
            let zero = DVector::zeros(n);
            match simplex(&at, &zero, &cost, opts, &mut iterations) {
                StdOutcome::Unbounded => Ok(SolveStatus::failed(SolveKind::Infeasible, n, m, iterations)),
                StdOutcome::Optimal { .. } => Ok(SolveStatus::failed(SolveKind::Unbounded, n, m, iterations)),
                _ => Ok(SolveStatus::failed(SolveKind::MaxIter, n, m, iterations)),
            }
        }
    }
}

fn lp_kkt(
    c: &DVector<f64>,
    a_ineq: &DMatrix<f64>,
    b_ineq: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    x: &DVector<f64>,
    dual: &DVector<f64>,
) -> f64 {
    let m_in = a_ineq.nrows();
    let mut grad = c.clone();
    let mut worst: f64 = 0.0;
    for i in 0..m_in {
        let row = a_ineq.row(i);
        grad += row.transpose() * dual[i];
        let slack = b_ineq[i] - row.dot(&x.transpose());
        worst = worst.max(-slack).max((dual[i] * slack).abs()).max(-dual[i]);
    }
    for i in 0..a_eq.nrows() {
        let row = a_eq.row(i);
        grad += row.transpose() * dual[m_in + i];
        worst = worst.max((row.dot(&x.transpose()) - b_eq[i]).abs());
    }
    worst.max(grad.amax())
}

enum StdOutcome {
    Optimal { y: DVector<f64>, pi: DVector<f64> },
    Infeasible,
    Unbounded,
    MaxIter,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    MaxIter,
}

/// Revised simplex on `min cᵀy, Ay = b, y ≥ 0` with an explicit basis
/// inverse. Dantzig pricing switches permanently to Bland's rule after a run
/// of degenerate pivots.
struct Tableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    ncols: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    pivots_since_refactor: usize,
}

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;

impl Tableau {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.ncols {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.a.nrows());
            e[j - self.ncols] = 1.0;
            e
        }
    }

    fn column_dot(&self, j: usize, v: &DVector<f64>) -> f64 {
        if j < self.ncols {
            self.a.column(j).dot(v)
        } else {
            v[j - self.ncols]
        }
    }

    fn pivot(&mut self, r: usize, j: usize, w: &DVector<f64>) {
        let m = self.binv.nrows();
        let wr = w[r];
        let theta = self.xb[r] / wr;
        for i in 0..m {
            if i != r {
                self.xb[i] -= theta * w[i];
            }
        }
        self.xb[r] = theta;
        let row_r = self.binv.row(r) / wr;
        for i in 0..m {
            if i != r && w[i] != 0.0 {
                let wi = w[i];
                let updated = self.binv.row(i) - &row_r * wi;
                self.binv.row_mut(i).copy_from(&updated);
            }
        }
        self.binv.row_mut(r).copy_from(&row_r);
        self.is_basic[self.basis[r]] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn refactor(&mut self) {
        let m = self.binv.nrows();
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.column_mut(k).copy_from(&self.column(j));
        }
        if let Some(inv) = bmat.try_inverse() {
            self.binv = inv;
            self.xb = &self.binv * &self.b;
            for v in self.xb.iter_mut() {
                if *v < 0.0 && *v > -1e-9 {
                    *v = 0.0;
                }
            }
        }
        self.pivots_since_refactor = 0;
    }

    fn run(&mut self, cost: &DVector<f64>, opts: &LpOptions, iterations: &mut usize) -> PhaseOutcome {
        let m = self.binv.nrows();
        let mut bland = false;
        let mut degenerate = 0usize;
        let mut last_obj = f64::INFINITY;
        loop {
            if *iterations >= opts.max_iter {
                return PhaseOutcome::MaxIter;
            }
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
            let pi = self.binv.tr_mul(&cb);

            let mut entering = None;
            let mut best = -opts.tol;
            for j in 0..self.ncols {
                if self.is_basic[j] {
                    continue;
                }
                let rc = cost[j] - self.column_dot(j, &pi);
                if bland {
                    if rc < -opts.tol {
                        entering = Some(j);
                        break;
                    }
                } else if rc < best {
                    best = rc;
                    entering = Some(j);
                }
            }
            let Some(j) = entering else {
                return PhaseOutcome::Optimal;
            };
            *iterations += 1;

            let w = &self.binv * self.column(j);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                if w[i] <= opts.tol {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / w[i];
                let take = match leave {
                    None => true,
                    Some(l) => {
                        if ratio < best_ratio - 1e-12 {
                            true
                        } else if ratio <= best_ratio + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                w[i] > w[l]
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let Some(r) = leave else {
                return PhaseOutcome::Unbounded;
            };
            if self.xb[r] < 0.0 {
                self.xb[r] = 0.0;
            }
            self.pivot(r, j, &w);

            let obj: f64 = self.basis.iter().zip(self.xb.iter()).map(|(&k, &x)| cost[k] * x).sum();
            if obj < last_obj - 1e-12 * (1.0 + obj.abs()) {
                degenerate = 0;
            } else {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            }
            last_obj = obj;
        }
    }
}

fn simplex(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, opts: &LpOptions, iterations: &mut usize) -> StdOutcome {
    let (m, ncols) = a.shape();
    let mut a = a.clone();
    let mut b = b.clone();
    let mut sign = vec![1.0; m];
    for r in 0..m {
        if b[r] < 0.0 {
            a.row_mut(r).neg_mut();
            b[r] = -b[r];
            sign[r] = -1.0;
        }
    }
    let total = ncols + m;
    let mut is_basic = vec![false; total];
    for k in 0..m {
        is_basic[ncols + k] = true;
    }
    let mut t = Tableau {
        xb: b.clone(),
        a,
        b,
        ncols,
        basis: (ncols..total).collect(),
        is_basic,
        binv: DMatrix::identity(m, m),
        pivots_since_refactor: 0,
    };

    // Phase 1: drive artificials to zero.
    let mut cost1 = DVector::zeros(total);
    for k in 0..m {
        cost1[ncols + k] = 1.0;
    }
    match t.run(&cost1, opts, iterations) {
        PhaseOutcome::MaxIter => return StdOutcome::MaxIter,
        PhaseOutcome::Unbounded => return StdOutcome::Infeasible,
        PhaseOutcome::Optimal => {}
    }
    t.refactor();
    let infeas: f64 = t.basis.iter().zip(t.xb.iter()).filter(|(&j, _)| j >= ncols).map(|(_, &x)| x.max(0.0)).sum();
    if infeas > 1e-8 * (1.0 + t.b.amax()) {
        return StdOutcome::Infeasible;
    }

    // Pivot remaining (zero-level) artificials out where possible; rows
    // where that is impossible are redundant and keep their artificial.
    for r in 0..m {
        if t.basis[r] < ncols {
            continue;
        }
        let row = t.binv.row(r).transpose();
        let mut best = 1e-9;
        let mut enter = None;
        for j in 0..ncols {
            if t.is_basic[j] {
                continue;
            }
            let v = t.a.column(j).dot(&row).abs();
            if v > best {
                best = v;
                enter = Some(j);
            }
        }
        if let Some(j) = enter {
            t.xb[r] = 0.0;
            let w = &t.binv * t.column(j);
            t.pivot(r, j, &w);
        }
    }

    // Phase 2. Artificials never re-enter (only columns < ncols are priced).
    let mut cost2 = DVector::zeros(total);
    cost2.rows_mut(0, ncols).copy_from(c);
    match t.run(&cost2, opts, iterations) {
        PhaseOutcome::MaxIter => StdOutcome::MaxIter,
        PhaseOutcome::Unbounded => StdOutcome::Unbounded,
        PhaseOutcome::Optimal => {
            t.refactor();
            let mut y = DVector::zeros(ncols);
            for (k, &j) in t.basis.iter().enumerate() {
                if j < ncols {
                    y[j] = t.xb[k].max(0.0);
                }
            }
            let cb = DVector::from_iterator(m, t.basis.iter().map(|&j| cost2[j]));
            let mut pi = t.binv.tr_mul(&cb);
            for r in 0..m {
                pi[r] *= sign[r];
            }
            StdOutcome::Optimal { y, pi }
        }
    }
}

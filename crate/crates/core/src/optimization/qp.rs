use nalgebra::{Cholesky, DMatrix, DVector};

use super::{SolveKind, SolveStatus};
use crate::error::{Error, Result};

/// `min ½zᵀHz + gᵀz  s.t.  A_in z ≤ b_in,  A_eq z = b_eq`.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QuadraticProgram {
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        QuadraticProgram {
            h,
            g,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    /// Checks shapes, finiteness, symmetry (1e-10) and positive
    /// semi-definiteness (Cholesky with a 1e-10 diagonal shift).
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h.shape() != (n, n) {
            return Err(Error::dim("H must be n×n"));
        }
        if self.a_ineq.nrows() > 0 && self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return Err(Error::dim("inequality block"));
        }
        if self.a_eq.nrows() > 0 && self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(Error::dim("equality block"));
        }
        let all = self.h.iter().chain(self.g.iter()).chain(self.a_ineq.iter()).chain(self.b_ineq.iter()).chain(self.a_eq.iter()).chain(self.b_eq.iter());
        if !all.clone().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("QP data must be finite".into()));
        }
        if (&self.h - self.h.transpose()).amax() > 1e-10 {
            return Err(Error::InvalidArgument("H is not symmetric".into()));
        }
        let shifted = &self.h + DMatrix::identity(n, n) * 1e-10;
        if Cholesky::new(shifted).is_none() {
            return Err(Error::InvalidArgument("H is not positive semi-definite".into()));
        }
        Ok(())
    }

    /// Max of stationarity, primal infeasibility, complementarity and dual
    /// infeasibility residuals (absolute).
    pub fn kkt_residual(&self, z: &DVector<f64>, dual: &DVector<f64>) -> f64 {
        let m_in = self.a_ineq.nrows();
        let mut grad = &self.h * z + &self.g;
        let mut worst: f64 = 0.0;
        if m_in > 0 {
            let lam = dual.rows(0, m_in);
            grad += self.a_ineq.tr_mul(&lam);
            let slack = &self.b_ineq - &self.a_ineq * z;
            for i in 0..m_in {
                worst = worst.max(-slack[i]).max((lam[i] * slack[i]).abs()).max(-lam[i]);
            }
        }
        if self.a_eq.nrows() > 0 {
            let mu = dual.rows(m_in, self.a_eq.nrows());
            grad += self.a_eq.tr_mul(&mu);
            worst = worst.max((&self.a_eq * z - &self.b_eq).amax());
        }
        worst.max(grad.amax())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Constraint violation tolerance, measured along unit normals.
    pub feas_tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            max_iter: 50_000,
            feas_tol: 1e-11,
        }
    }
}

pub fn solve_qp(qp: &QuadraticProgram) -> Result<SolveStatus> {
    solve_qp_with(qp, &QpOptions::default())
}

/// Dual active-set method of Goldfarb and Idnani. A merely semi-definite
/// `H` is handled with proximal-point outer iterations.
pub fn solve_qp_with(qp: &QuadraticProgram, opts: &QpOptions) -> Result<SolveStatus> {
    qp.validate()?;
    let n = qp.dim();
    let m_in = qp.a_ineq.nrows();
    let m_eq = qp.a_eq.nrows();
    let m = m_in + m_eq;

    // n_iᵀ z ≥ b_i form, equalities first.
    let mut cm = DMatrix::zeros(m, n);
    let mut cb = DVector::zeros(m);
    for i in 0..m_eq {
        cm.row_mut(i).copy_from(&qp.a_eq.row(i));
        cb[i] = qp.b_eq[i];
    }
    for i in 0..m_in {
        cm.row_mut(m_eq + i).copy_from(&(-qp.a_ineq.row(i)));
        cb[m_eq + i] = -qp.b_ineq[i];
    }

    let strictly_convex = Cholesky::new(qp.h.clone()).is_some_and(|c| {
        let d = c.l().diagonal();
        let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        lo > 1e-7 * hi.max(1.0)
    });

    let (kind, z, u, iterations) = if strictly_convex {
        goldfarb_idnani(&qp.h, &qp.g, &cm, &cb, m_eq, opts)?
    } else {
        proximal(qp, &cm, &cb, m_eq, opts)?
    };

    if kind != SolveKind::Optimal {
        return Ok(SolveStatus::failed(kind, n, m, iterations));
    }
    let mut dual = DVector::zeros(m);
    for i in 0..m_in {
        dual[i] = u[m_eq + i];
    }
    for i in 0..m_eq {
        dual[m_in + i] = -u[i];
    }
    let kkt_residual = qp.kkt_residual(&z, &dual);
    Ok(SolveStatus {
        kind,
        objective: qp.objective(&z),
        primal: z,
        dual,
        kkt_residual,
        iterations,
    })
}

fn proximal(
    qp: &QuadraticProgram,
    cm: &DMatrix<f64>,
    cb: &DVector<f64>,
    meq: usize,
    opts: &QpOptions,
) -> Result<(SolveKind, DVector<f64>, DVector<f64>, usize)> {
    let n = qp.dim();
    let rho = 1e-3 * qp.h.diagonal().amax().max(1.0);
    let hr = &qp.h + DMatrix::identity(n, n) * rho;
    let mut z = DVector::zeros(n);
    let mut total = 0;
    for _ in 0..2_000 {
        let g = &qp.g - &z * rho;
        let (kind, next, u, it) = goldfarb_idnani(&hr, &g, cm, cb, meq, opts)?;
        total += it;
        if kind != SolveKind::Optimal {
            return Ok((kind, next, u, total));
        }
        let step = (&next - &z).amax();
        z = next;
        if step <= 1e-12 * (1.0 + z.amax()) {
            return Ok((kind, z, u, total));
        }
    }
    Ok((SolveKind::MaxIter, z, DVector::zeros(cm.nrows()), total))
}

/// Returns `(kind, z, u, iterations)` where `u` are the multipliers of the
/// rows of `cm` (with `Gz + a = Σ uᵢ nᵢ`).
fn goldfarb_idnani(
    gm: &DMatrix<f64>,
    a: &DVector<f64>,
    cm: &DMatrix<f64>,
    cb: &DVector<f64>,
    meq: usize,
    opts: &QpOptions,
) -> Result<(SolveKind, DVector<f64>, DVector<f64>, usize)> {
    let n = gm.nrows();
    let m = cm.nrows();
    let chol = Cholesky::new(gm.clone()).ok_or_else(|| Error::Numerical("H is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut jm = linv.transpose();
    let mut x = -chol.solve(a);
    let mut rm = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut is_active = vec![false; m];
    let mut eq_sign = vec![1.0; meq];
    let norms: Vec<f64> = (0..m).map(|i| cm.row(i).norm().max(1e-300)).collect();
    let mut iterations = 0usize;

    loop {
        // Step 1: pick a violated constraint (equalities first).
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..meq {
            if !is_active[i] {
                let s = cm.row(i).dot(&x.transpose()) - cb[i];
                pick = Some((i, if s > 0.0 { -1.0 } else { 1.0 }));
                break;
            }
        }
        if pick.is_none() {
            let mut worst = -opts.feas_tol;
            for i in meq..m {
                if is_active[i] {
                    continue;
                }
                let s = (cm.row(i).dot(&x.transpose()) - cb[i]) / norms[i];
                if s < worst {
                    worst = s;
                    pick = Some((i, 1.0));
                }
            }
        }
        let Some((p, sign)) = pick else {
            let mut ufull = DVector::zeros(m);
            for (k, &i) in active.iter().enumerate() {
                ufull[i] = if i < meq { u[k] * eq_sign[i] } else { u[k] };
            }
            return Ok((SolveKind::Optimal, x, ufull, iterations));
        };
        if p < meq {
            eq_sign[p] = sign;
        }
        let np = cm.row(p).transpose() * sign;
        let bp = cb[p] * sign;
        let mut up = 0.0;

        loop {
            iterations += 1;
            if iterations > opts.max_iter {
                return Ok((SolveKind::MaxIter, x, DVector::zeros(m), iterations));
            }
            let q = active.len();
            let d = jm.tr_mul(&np);
            let z = jm.columns(q, n - q) * d.rows(q, n - q);
            let r = if q > 0 {
                rm.view((0, 0), (q, q))
                    .solve_upper_triangular(&d.rows(0, q).into_owned())
                    .ok_or_else(|| Error::Numerical("singular active-set factor".into()))?
            } else {
                DVector::zeros(0)
            };

            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for k in 0..q {
                if active[k] >= meq && r[k] > 0.0 {
                    let ratio = u[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            let d2 = d.rows(q, n - q).norm_squared();
            let t2 = if d2 > 1e-14 * d.norm_squared() && d2 > 0.0 {
                let s = np.dot(&x) - bp;
                (-s / d2).max(0.0)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Ok((SolveKind::Infeasible, x, DVector::zeros(m), iterations));
            }
            for k in 0..q {
                u[k] -= t * r[k];
            }
            up += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                add_constraint(&mut jm, &mut rm, d, q);
                active.push(p);
                u.push(up);
                is_active[p] = true;
                break;
            }
            let k = drop_at.expect("partial step always has a blocking constraint");
            drop_constraint(&mut jm, &mut rm, q, k);
            is_active[active[k]] = false;
            active.remove(k);
            u.remove(k);
        }
    }
}

fn add_constraint(jm: &mut DMatrix<f64>, rm: &mut DMatrix<f64>, mut d: DVector<f64>, q: usize) {
    let n = jm.nrows();
    for i in (q + 1..n).rev() {
        let (a, b) = (d[i - 1], d[i]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        d[i - 1] = h;
        d[i] = 0.0;
        for k in 0..n {
            let (x, y) = (jm[(k, i - 1)], jm[(k, i)]);
            jm[(k, i - 1)] = c * x + s * y;
            jm[(k, i)] = -s * x + c * y;
        }
    }
    for i in 0..=q {
        rm[(i, q)] = d[i];
    }
}

fn drop_constraint(jm: &mut DMatrix<f64>, rm: &mut DMatrix<f64>, q: usize, l: usize) {
    let n = jm.nrows();
    for col in l..q - 1 {
        for row in 0..q {
            rm[(row, col)] = rm[(row, col + 1)];
        }
    }
    for row in 0..n {
        rm[(row, q - 1)] = 0.0;
    }
    for j in l..q - 1 {
        let (a, b) = (rm[(j, j)], rm[(j + 1, j)]);
        if b == 0.0 {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for k in j..q - 1 {
            let (x, y) = (rm[(j, k)], rm[(j + 1, k)]);
            rm[(j, k)] = c * x + s * y;
            rm[(j + 1, k)] = -s * x + c * y;
        }
        rm[(j + 1, j)] = 0.0;
        for k in 0..n {
            let (x, y) = (jm[(k, j)], jm[(k, j + 1)]);
            jm[(k, j)] = c * x + s * y;
            jm[(k, j + 1)] = -s * x + c * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bound_constrained_scalar() {
        // min ½x² s.t. x ≥ 1
        let qp = QuadraticProgram::unconstrained(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1))
            .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0));
        let s = solve_qp(&qp).unwrap();
        assert_eq!(s.kind, SolveKind::Optimal);
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective, 0.5, epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-9);
    }

    #[test]
    fn symmetric_equality() {
        let qp = QuadraticProgram::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 2.0));
        let s = solve_qp(&qp).unwrap();
        assert_abs_diff_eq!(s.primal[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.primal[1], 1.0, epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-9);
    }

    #[test]
    fn infeasible_is_reported() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, -1.0]);
        let qp = QuadraticProgram::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1)).with_inequalities(a, b);
        assert_eq!(solve_qp(&qp).unwrap().kind, SolveKind::Infeasible);
    }

    #[test]
    fn semidefinite_cost_uses_proximal_iterations() {
        // min ½x² - y  s.t. y ≤ 2, x + y ≥ 1  ->  y = 2, x = 0
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let g = DVector::from_vec(vec![0.0, -1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0]);
        let s = solve_qp(&QuadraticProgram::unconstrained(h, g).with_inequalities(a, b)).unwrap();
        assert_eq!(s.kind, SolveKind::Optimal);
        assert_abs_diff_eq!(s.primal[1], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s.primal[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(solve_qp(&QuadraticProgram::unconstrained(h, DVector::zeros(2))).is_err());
    }
}

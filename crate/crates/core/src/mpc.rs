//! Robust MPC with causal affine disturbance feedback
//! `u_k = ū_k + Σ_{j<k} K_kj d_j` over a per-step disturbance box.
//!
//! The realized prediction is `x_k = x̄_k + Σ_{j<k} Φ_kj d_j` with
//! `Φ_kj = A^{k−1−j} + Σ_{l=j+1}^{k−1} A^{k−1−l} B K_lj`. Each constraint row
//! is robustified by its exact worst case over the box. Absolute values of
//! coefficients that depend on `K` are lifted with slack variables.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{Hyperbox, Polytope};
use crate::invariant::{max_rpi, InvariantSet};
use crate::optimization::{dlqr, solve_qp, Lqr, QuadraticProgram, SolveKind};

/// Regularization weight on the gain entries.
pub const GAIN_REG: f64 = 1e-9;
/// Regularization weight on the slack variables. It drives every slack to
/// the absolute value it bounds.
pub const SLACK_REG: f64 = 1e-8;

/// How the disturbance feedback gains are chosen.
#[derive(Debug, Clone)]
pub enum FeedbackMode {
    /// Gains are decision variables.
    Optimized,
    /// Tube policy `u = ū − K(x − x̄)`, i.e. `K_kj = −K A_clᵏ⁻¹⁻ʲ`.
    Fixed(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct RobustMpcProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Terminal gain with `u = −K x`.
    pub k_term: DMatrix<f64>,
    pub x: Polytope,
    pub u: Polytope,
    pub d: Hyperbox,
    pub terminal: Polytope,
    pub feedback: FeedbackMode,
}

impl RobustMpcProblem {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_dim();
        if self.a.shape() != (n, n) || self.b.nrows() != n {
            return Err(Error::dim("A must be n×n and B n×m"));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.q.shape() != (n, n) || self.r.shape() != (m, m) || self.p.shape() != (n, n) || self.k_term.shape() != (m, n) {
            return Err(Error::dim("cost matrices or terminal gain"));
        }
        if self.x.dim() != n || self.terminal.dim() != n || self.u.dim() != m || self.d.dim() != n {
            return Err(Error::dim("constraint set dimensions"));
        }
        if self.d.is_empty() {
            return Err(Error::InvalidArgument("disturbance box is empty".into()));
        }
        if let FeedbackMode::Fixed(k) = &self.feedback {
            if k.shape() != (m, n) {
                return Err(Error::dim("fixed feedback gain must be m×n"));
            }
        }
        let sym = |mm: &DMatrix<f64>| (mm - mm.transpose()).amax() <= 1e-10 * mm.amax().max(1.0);
        if !sym(&self.q) || !sym(&self.r) || !sym(&self.p) {
            return Err(Error::InvalidArgument("Q, R and P must be symmetric".into()));
        }
        if self.q.symmetric_eigenvalues().min() < -1e-12 {
            return Err(Error::InvalidArgument("Q must be positive semidefinite".into()));
        }
        if self.r.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("R must be positive definite".into()));
        }
        if lyapunov_gap(&self.a, &self.b, &self.q, &self.r, &self.p, &self.k_term) > 1e-8 * self.p.amax().max(1.0) {
            return Err(Error::InvalidArgument("terminal cost does not decrease under the terminal gain".into()));
        }
        Ok(())
    }

    /// The tube gain, or `None` when the gains are optimized.
    fn fixed_gain(&self) -> Option<&DMatrix<f64>> {
        match &self.feedback {
            FeedbackMode::Fixed(k) => Some(k),
            FeedbackMode::Optimized => None,
        }
    }
}

/// Largest eigenvalue of `A_clᵀPA_cl − P + Q + KᵀRK`.
pub fn lyapunov_gap(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let acl = a - b * k;
    let m = acl.transpose() * p * &acl - p + q + k.transpose() * r * k;
    ((&m + m.transpose()) * 0.5).symmetric_eigenvalues().max()
}

/// Terminal cost, gain and terminal set.
#[derive(Debug, Clone)]
pub struct TerminalIngredients {
    pub lqr: Lqr,
    /// `None` when the maximal RPI set is empty.
    pub terminal: Option<InvariantSet>,
}

/// LQR terminal cost and gain, and the maximal RPI set of `A − BK` under
/// `d_box`, `X` and `−Kx ∈ U_eff`.
pub fn terminal_ingredients(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    d_box: &Hyperbox,
    x: &Polytope,
    u_eff: &Polytope,
) -> Result<TerminalIngredients> {
    let lqr = dlqr(a, b, q, r)?;
    let a_cl = a - b * &lqr.k;
    let terminal = max_rpi(&a_cl, d_box, x, u_eff, &lqr.k)?;
    Ok(TerminalIngredients { lqr, terminal })
}

/// Which constraint a robustified row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    State { step: usize, row: usize },
    Input { step: usize, row: usize },
    Terminal { row: usize },
}

/// A robustified constraint row of the compiled QP.
#[derive(Debug, Clone)]
pub struct RowTag {
    pub kind: RowKind,
    /// Index into the QP inequality block.
    pub qp_row: usize,
    /// Right-hand side of the original constraint.
    pub rhs: f64,
}

#[derive(Debug, Clone)]
struct SlackDef {
    c0: f64,
    terms: Vec<(usize, f64)>,
}

/// The QP together with the bookkeeping needed to map between decision
/// vectors and policies.
#[derive(Debug, Clone)]
pub struct CompiledMpc {
    pub qp: QuadraticProgram,
    pub num_inputs: usize,
    pub num_gains: usize,
    pub num_slacks: usize,
    pub rows: Vec<RowTag>,
    /// Cost contribution of `x0` alone.
    pub constant: f64,
    slacks: Vec<SlackDef>,
    gain_index: Vec<(usize, usize)>,
    n: usize,
    m: usize,
}

/// Lower-triangular gain array `gains[k][j]`, `j < k`.
pub type Gains = Vec<Vec<DMatrix<f64>>>;

impl CompiledMpc {
    /// First variable index of the gain block `K_lj`.
    fn gain_offset(&self, l: usize, j: usize) -> usize {
        let pos = self.gain_index.iter().position(|&p| p == (l, j)).expect("gain block exists");
        self.num_inputs + pos * self.m * self.n
    }

    /// Builds the decision vector for a given policy, with every slack set
    /// to the absolute value it bounds.
    pub fn lift(&self, ubar: &[DVector<f64>], gains: &Gains) -> DVector<f64> {
        let nz = self.qp.dim();
        let mut z = DVector::zeros(nz);
        for (k, u) in ubar.iter().enumerate() {
            z.rows_mut(k * self.m, self.m).copy_from(u);
        }
        for &(l, j) in &self.gain_index {
            let off = self.gain_offset(l, j);
            let kb = &gains[l][j];
            for p in 0..self.m {
                for i in 0..self.n {
                    z[off + p * self.n + i] = kb[(p, i)];
                }
            }
        }
        let base = self.num_inputs + self.num_gains;
        for (s, def) in self.slacks.iter().enumerate() {
            let c = def.c0 + def.terms.iter().map(|&(v, w)| w * z[v]).sum::<f64>();
            z[base + s] = c.abs();
        }
        z
    }

    /// Worst-case left-hand side of each original constraint row, as
    /// encoded by the QP at decision `z`.
    pub fn worst_case_values(&self, z: &DVector<f64>) -> Vec<f64> {
        self.rows
            .iter()
            .map(|t| self.qp.a_ineq.row(t.qp_row).dot(&z.transpose()) + t.rhs - self.qp.b_ineq[t.qp_row])
            .collect()
    }

    /// Objective of `z` without the regularization terms, including the
    /// constant term.
    pub fn nominal_objective(&self, z: &DVector<f64>) -> f64 {
        let base = self.num_inputs;
        let reg_k: f64 = z.rows(base, self.num_gains).norm_squared() * GAIN_REG;
        let reg_s: f64 = z.rows(base + self.num_gains, self.num_slacks).norm_squared() * SLACK_REG;
        self.qp.objective(z) - reg_k - reg_s + self.constant
    }

    /// Matrices of the QP as JSON for external verification.
    pub fn to_json(&self) -> serde_json::Value {
        let mat = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>();
        json!({
            "H": mat(&self.qp.h),
            "g": self.qp.g.as_slice(),
            "A_ineq": mat(&self.qp.a_ineq),
            "b_ineq": self.qp.b_ineq.as_slice(),
            "A_eq": mat(&self.qp.a_eq),
            "b_eq": self.qp.b_eq.as_slice(),
            "num_inputs": self.num_inputs,
            "num_gains": self.num_gains,
            "num_slacks": self.num_slacks,
            "constant": self.constant,
        })
    }
}

/// Sparse linear form over the base variables (inputs and gains).
type Form = Vec<(usize, f64)>;

struct Builder<'a> {
    prob: &'a RobustMpcProblem,
    apow: Vec<DMatrix<f64>>,
    aclpow: Vec<DMatrix<f64>>,
    gain_index: Vec<(usize, usize)>,
    num_inputs: usize,
    num_gains: usize,
    rows: Vec<(Form, f64)>,
    slacks: Vec<SlackDef>,
    tags: Vec<RowTag>,
}

impl<'a> Builder<'a> {
    fn gain_var(&self, l: usize, j: usize, p: usize, i: usize) -> usize {
        let pos = self.gain_index.iter().position(|&q| q == (l, j)).expect("gain block exists");
        let n = self.prob.state_dim();
        self.num_inputs + pos * self.prob.input_dim() * n + p * n + i
    }

    /// Disturbance coefficient of `aᵀ x_k` with respect to `d_j`.
    fn state_coeff(&self, a: &DVector<f64>, k: usize, j: usize) -> (DVector<f64>, Vec<Form>) {
        let n = self.prob.state_dim();
        let m = self.prob.input_dim();
        if self.prob.fixed_gain().is_some() {
            return (self.aclpow[k - 1 - j].transpose() * a, vec![Vec::new(); n]);
        }
        let c0 = self.apow[k - 1 - j].transpose() * a;
        let mut forms = vec![Vec::new(); n];
        for l in (j + 1)..k {
            let v = (&self.apow[k - 1 - l] * &self.prob.b).transpose() * a;
            for (i, form) in forms.iter_mut().enumerate() {
                for p in 0..m {
                    if v[p] != 0.0 {
                        form.push((self.gain_var(l, j, p, i), v[p]));
                    }
                }
            }
        }
        (c0, forms)
    }

    /// Disturbance coefficient of `gᵀ u_k` with respect to `d_j`.
    fn input_coeff(&self, g: &DVector<f64>, k: usize, j: usize) -> (DVector<f64>, Vec<Form>) {
        let n = self.prob.state_dim();
        let m = self.prob.input_dim();
        if let Some(kf) = self.prob.fixed_gain() {
            let kj = -(kf * &self.aclpow[k - 1 - j]);
            return (kj.transpose() * g, vec![Vec::new(); n]);
        }
        let mut forms = vec![Vec::new(); n];
        for (i, form) in forms.iter_mut().enumerate() {
            for p in 0..m {
                if g[p] != 0.0 {
                    form.push((self.gain_var(k, j, p, i), g[p]));
                }
            }
        }
        (DVector::zeros(n), forms)
    }

    /// Adds `nominal + Σ_j max_{d_j ∈ D} c_jᵀ d_j ≤ rhs`.
    fn push(&mut self, kind: RowKind, mut nominal: Form, offset: f64, rhs: f64, coeffs: Vec<(DVector<f64>, Vec<Form>)>) {
        let center = self.prob.d.center().clone();
        let radius = self.prob.d.half_widths().clone();
        let mut bound = rhs - offset;
        for (c0, forms) in coeffs {
            for i in 0..c0.len() {
                if center[i] != 0.0 {
                    bound -= center[i] * c0[i];
                    nominal.extend(forms[i].iter().map(|&(v, w)| (v, w * center[i])));
                }
                if radius[i] == 0.0 {
                    continue;
                }
                if forms[i].is_empty() {
                    bound -= radius[i] * c0[i].abs();
                    continue;
                }
                let s = self.num_inputs + self.num_gains + self.slacks.len();
                let mut up = forms[i].clone();
                up.push((s, -1.0));
                let mut down: Form = forms[i].iter().map(|&(v, w)| (v, -w)).collect();
                down.push((s, -1.0));
                self.rows.push((up, -c0[i]));
                self.rows.push((down, c0[i]));
                self.slacks.push(SlackDef {
                    c0: c0[i],
                    terms: forms[i].clone(),
                });
                nominal.push((s, radius[i]));
            }
        }
        self.tags.push(RowTag {
            kind,
            qp_row: self.rows.len(),
            rhs,
        });
        self.rows.push((nominal, bound));
    }
}

/// Compiles the robust problem at initial state `x0` into a QP over
/// `(ū, vec K, slacks)`.
pub fn compile(prob: &RobustMpcProblem, x0: &DVector<f64>) -> Result<CompiledMpc> {
    prob.validate()?;
    let n = prob.state_dim();
    let m = prob.input_dim();
    let nh = prob.horizon;
    if x0.len() != n {
        return Err(Error::dim("initial state length"));
    }
    let mut apow = vec![DMatrix::identity(n, n)];
    for k in 1..=nh {
        apow.push(&prob.a * &apow[k - 1]);
    }
    let mut aclpow = vec![DMatrix::identity(n, n)];
    if let Some(kf) = prob.fixed_gain() {
        let acl = &prob.a - &prob.b * kf;
        for k in 1..=nh {
            aclpow.push(&acl * &aclpow[k - 1]);
        }
    }
    let num_inputs = nh * m;
    let gain_index: Vec<(usize, usize)> = match prob.feedback {
        FeedbackMode::Optimized => (1..nh).flat_map(|l| (0..l).map(move |j| (l, j))).collect(),
        FeedbackMode::Fixed(_) => Vec::new(),
    };
    let num_gains = gain_index.len() * m * n;

    // Nominal prediction x̄_k = A^k x0 + Su_k ū.
    let mut su: Vec<DMatrix<f64>> = Vec::with_capacity(nh + 1);
    let mut free: Vec<DVector<f64>> = Vec::with_capacity(nh + 1);
    for k in 0..=nh {
        let mut s = DMatrix::zeros(n, num_inputs);
        for i in 0..k {
            s.view_mut((0, i * m), (n, m)).copy_from(&(&apow[k - 1 - i] * &prob.b));
        }
        su.push(s);
        free.push(&apow[k] * x0);
    }

    let mut b = Builder {
        prob,
        apow,
        aclpow,
        gain_index: gain_index.clone(),
        num_inputs,
        num_gains,
        rows: Vec::new(),
        slacks: Vec::new(),
        tags: Vec::new(),
    };

    let dense_form = |row: DVector<f64>| -> Form { row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect() };

    for k in 0..nh {
        for r in 0..prob.u.nrows() {
            let g = prob.u.a().row(r).transpose();
            let mut nominal = Form::new();
            for p in 0..m {
                if g[p] != 0.0 {
                    nominal.push((k * m + p, g[p]));
                }
            }
            let coeffs = (0..k).map(|j| b.input_coeff(&g, k, j)).collect();
            b.push(RowKind::Input { step: k, row: r }, nominal, 0.0, prob.u.b()[r], coeffs);
        }
        if k == 0 {
            continue;
        }
        for r in 0..prob.x.nrows() {
            let a = prob.x.a().row(r).transpose();
            let nominal = dense_form(su[k].transpose() * &a);
            let coeffs = (0..k).map(|j| b.state_coeff(&a, k, j)).collect();
            b.push(RowKind::State { step: k, row: r }, nominal, a.dot(&free[k]), prob.x.b()[r], coeffs);
        }
    }
    for r in 0..prob.terminal.nrows() {
        let a = prob.terminal.a().row(r).transpose();
        let nominal = dense_form(su[nh].transpose() * &a);
        let coeffs = (0..nh).map(|j| b.state_coeff(&a, nh, j)).collect();
        b.push(RowKind::Terminal { row: r }, nominal, a.dot(&free[nh]), prob.terminal.b()[r], coeffs);
    }

    let num_slacks = b.slacks.len();
    let nz = num_inputs + num_gains + num_slacks;
    let mut a_ineq = DMatrix::zeros(b.rows.len(), nz);
    let mut b_ineq = DVector::zeros(b.rows.len());
    for (i, (form, rhs)) in b.rows.iter().enumerate() {
        for &(v, w) in form {
            a_ineq[(i, v)] += w;
        }
        b_ineq[i] = *rhs;
    }

    // Cost Σ_{k<N} x̄_kᵀQx̄_k + ū_kᵀRū_k + x̄_NᵀPx̄_N.
    let mut h = DMatrix::zeros(nz, nz);
    let mut g = DVector::zeros(nz);
    let mut constant = 0.0;
    {
        let mut huu = DMatrix::zeros(num_inputs, num_inputs);
        let mut gu = DVector::zeros(num_inputs);
        for k in 0..=nh {
            let w = if k == nh { &prob.p } else { &prob.q };
            huu += su[k].transpose() * w * &su[k];
            gu += su[k].transpose() * (w * &free[k]);
            constant += free[k].dot(&(w * &free[k]));
        }
        for k in 0..nh {
            huu.view_mut((k * m, k * m), (m, m)).add_assign(&prob.r);
        }
        h.view_mut((0, 0), (num_inputs, num_inputs)).copy_from(&(huu * 2.0));
        g.rows_mut(0, num_inputs).copy_from(&(gu * 2.0));
    }
    for i in num_inputs..num_inputs + num_gains {
        h[(i, i)] = 2.0 * GAIN_REG;
    }
    for i in num_inputs + num_gains..nz {
        h[(i, i)] = 2.0 * SLACK_REG;
    }
    h = (&h + h.transpose()) * 0.5;

    let qp = QuadraticProgram::unconstrained(h, g).with_inequalities(a_ineq, b_ineq);
    Ok(CompiledMpc {
        qp,
        num_inputs,
        num_gains,
        num_slacks,
        rows: b.tags,
        constant,
        slacks: b.slacks,
        gain_index,
        n,
        m,
    })
}

trait AddAssignView {
    fn add_assign(&mut self, other: &DMatrix<f64>);
}

impl AddAssignView for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign(&mut self, other: &DMatrix<f64>) {
        for j in 0..other.ncols() {
            for i in 0..other.nrows() {
                self[(i, j)] += other[(i, j)];
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    pub status: SolveKind,
    /// First robust input `ū_0` (zeros unless optimal).
    pub u0: DVector<f64>,
    pub nominal_x: Vec<DVector<f64>>,
    pub nominal_u: Vec<DVector<f64>>,
    pub gains: Gains,
    /// Nominal trajectory cost, excluding regularization.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl MpcSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveKind::Optimal
    }

    fn failed(status: SolveKind, m: usize, iterations: usize) -> Self {
        MpcSolution {
            status,
            u0: DVector::zeros(m),
            nominal_x: Vec::new(),
            nominal_u: Vec::new(),
            gains: Vec::new(),
            objective: f64::INFINITY,
            kkt_residual: f64::INFINITY,
            iterations,
        }
    }
}

/// Solves the robust problem at `x0`. Infeasibility is reported in the
/// returned status.
pub fn solve(prob: &RobustMpcProblem, x0: &DVector<f64>) -> Result<MpcSolution> {
    let n = prob.state_dim();
    let m = prob.input_dim();
    if x0.len() != n {
        return Err(Error::dim("initial state length"));
    }
    if prob.x.max_violation(x0) > 1e-9 {
        prob.validate()?;
        return Ok(MpcSolution::failed(SolveKind::Infeasible, m, 0));
    }
    let compiled = compile(prob, x0)?;
    let st = solve_qp(&compiled.qp)?;
    if !st.is_optimal() {
        return Ok(MpcSolution::failed(st.kind, m, st.iterations));
    }
    let z = &st.primal;
    let nominal_u: Vec<DVector<f64>> = (0..prob.horizon).map(|k| z.rows(k * m, m).into_owned()).collect();
    let gains = extract_gains(prob, &compiled, z);
    let nominal_x = nominal_trajectory(prob, x0, &nominal_u);
    Ok(MpcSolution {
        status: SolveKind::Optimal,
        u0: nominal_u[0].clone(),
        objective: compiled.nominal_objective(z),
        nominal_x,
        nominal_u,
        gains,
        kkt_residual: st.kkt_residual,
        iterations: st.iterations,
    })
}

fn extract_gains(prob: &RobustMpcProblem, compiled: &CompiledMpc, z: &DVector<f64>) -> Gains {
    let n = prob.state_dim();
    let m = prob.input_dim();
    let nh = prob.horizon;
    match &prob.feedback {
        FeedbackMode::Fixed(kf) => {
            let acl = &prob.a - &prob.b * kf;
            (0..nh)
                .map(|k| {
                    (0..k)
                        .map(|j| {
                            let mut p = DMatrix::identity(n, n);
                            for _ in 0..(k - 1 - j) {
                                p = &acl * p;
                            }
                            -(kf * p)
                        })
                        .collect()
                })
                .collect()
        }
        FeedbackMode::Optimized => (0..nh)
            .map(|k| {
                (0..k)
                    .map(|j| {
                        let off = compiled.gain_offset(k, j);
                        DMatrix::from_fn(m, n, |p, i| z[off + p * n + i])
                    })
                    .collect()
            })
            .collect(),
    }
}

/// `x̄_{k+1} = A x̄_k + B ū_k` from `x0`.
pub fn nominal_trajectory(prob: &RobustMpcProblem, x0: &DVector<f64>, ubar: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut xs = vec![x0.clone()];
    for u in ubar {
        let next = &prob.a * xs.last().expect("non-empty") + &prob.b * u;
        xs.push(next);
    }
    xs
}

/// Nominal cost recomputed directly from the trajectory.
pub fn trajectory_cost(prob: &RobustMpcProblem, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
    let stage: f64 = us.iter().zip(xs).map(|(u, x)| x.dot(&(&prob.q * x)) + u.dot(&(&prob.r * u))).sum();
    let xn = &xs[us.len()];
    stage + xn.dot(&(&prob.p * xn))
}

/// Simulates the affine policy `u_k = ū_k + Σ_{j<k} K_kj d_j` against the
/// disturbance sequence `ds` and returns the realized states and inputs.
pub fn rollout(prob: &RobustMpcProblem, x0: &DVector<f64>, ubar: &[DVector<f64>], gains: &Gains, ds: &[DVector<f64>]) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let mut xs = vec![x0.clone()];
    let mut us = Vec::with_capacity(ubar.len());
    for k in 0..ubar.len() {
        let mut u = ubar[k].clone();
        for j in 0..k {
            u += &gains[k][j] * &ds[j];
        }
        let next = &prob.a * &xs[k] + &prob.b * &u + &ds[k];
        us.push(u);
        xs.push(next);
    }
    (xs, us)
}

/// Largest constraint violation of one realized trajectory.
pub fn rollout_violation(prob: &RobustMpcProblem, xs: &[DVector<f64>], us: &[DVector<f64>]) -> f64 {
    let nh = us.len();
    let mut worst = f64::NEG_INFINITY;
    for u in us {
        worst = worst.max(prob.u.max_violation(u));
    }
    for x in &xs[..nh] {
        worst = worst.max(prob.x.max_violation(x));
    }
    worst.max(prob.terminal.max_violation(&xs[nh]))
}

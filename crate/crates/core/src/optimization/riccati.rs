use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Infinite-horizon LQR solution: the control law is `u = −Kx` and the
/// cost-to-go is `xᵀPx`.
#[derive(Debug, Clone)]
pub struct Lqr {
    pub k: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

const MAX_RICCATI_ITER: usize = 100_000;

/// Solves the discrete algebraic Riccati equation by fixed-point iteration
/// from `P = Q`.
pub fn dlqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Lqr> {
    let n = a.nrows();
    let m = b.ncols();
    if a.shape() != (n, n) || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::dim("dlqr expects A n×n, B n×m, Q n×n, R m×m"));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::InvalidArgument("R must be positive definite".into()));
    }
    let mut p = q.clone();
    for _ in 0..MAX_RICCATI_ITER {
        let next = riccati_map(a, b, q, r, &p)?;
        let diff = (&next - &p).amax();
        p = (&next + next.transpose()) * 0.5;
        if diff <= 1e-10 * p.amax().max(1.0) {
            let k = gain(a, b, r, &p)?;
            let rho = spectral_radius(&(a - b * &k));
            if rho >= 1.0 {
                return Err(Error::Numerical(format!("LQR closed loop is not stable (spectral radius {rho})")));
            }
            return Ok(Lqr { k, p });
        }
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::RiccatiNoConvergence(MAX_RICCATI_ITER))
}

fn gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = r + b.transpose() * p * b;
    let chol = s.cholesky().ok_or_else(|| Error::Numerical("R + BᵀPB is not positive definite".into()))?;
    Ok(chol.solve(&(b.transpose() * p * a)))
}

fn riccati_map(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = gain(a, b, r, p)?;
    Ok(q + a.transpose() * p * a - a.transpose() * p * b * k)
}

/// `‖P − (Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA)‖_max`.
pub fn riccati_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    match riccati_map(a, b, q, r, p) {
        Ok(next) => (p - next).amax(),
        Err(_) => f64::INFINITY,
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

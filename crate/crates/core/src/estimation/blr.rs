use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::optimization::chi_square_quantile;

/// Gaussian posterior over one row: `w ~ N(mean, σ² Λ⁻¹)`.
#[derive(Debug, Clone)]
pub struct BlrRow {
    pub mean: DVector<f64>,
    pub lambda: DMatrix<f64>,
    pub lambda_inv: DMatrix<f64>,
    pub lambda0: DMatrix<f64>,
    pub sigma: f64,
    log_det0: f64,
    lambda0_max: f64,
}

impl BlrRow {
    fn new(mean: DVector<f64>, lambda0: DMatrix<f64>, sigma: f64) -> Result<Self> {
        let d = mean.len();
        if lambda0.shape() != (d, d) {
            return Err(Error::dim("prior precision must be d×d"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise scale must be positive".into()));
        }
        let sym = (&lambda0 + lambda0.transpose()) * 0.5;
        let chol = sym.clone().cholesky().ok_or_else(|| Error::InvalidArgument("prior precision must be positive definite".into()))?;
        let log_det0 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let lambda_inv = chol.inverse();
        let lambda0_max = sym.symmetric_eigenvalues().max();
        Ok(BlrRow {
            mean,
            lambda: sym.clone(),
            lambda_inv,
            lambda0: sym,
            sigma,
            log_det0,
            lambda0_max,
        })
    }

    fn update(&mut self, phi: &DVector<f64>, y: f64) -> Result<()> {
        if phi.norm() == 0.0 {
            return Ok(());
        }
        let li_phi = &self.lambda_inv * phi;
        let denom = 1.0 + phi.dot(&li_phi);
        let pred = self.mean.dot(phi);
        self.mean -= &li_phi * ((pred - y) / denom);
        self.lambda_inv -= &li_phi * li_phi.transpose() / denom;
        self.lambda_inv = (&self.lambda_inv + self.lambda_inv.transpose()) * 0.5;
        self.lambda += phi * phi.transpose();
        let eig = self.lambda.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 || lo / hi < 1e-12 {
            return Err(Error::Numerical(format!("posterior precision lost definiteness (λmin {lo:e}, λmax {hi:e})")));
        }
        Ok(())
    }

    pub fn log_det(&self) -> f64 {
        match self.lambda.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            None => f64::NAN,
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda.symmetric_eigenvalues().min()
    }
}

/// Recursive Bayesian linear regression over the estimated rows, with the
/// time-uniform confidence scaling `β_t(δ/n)`.
#[derive(Debug, Clone)]
pub struct Blr {
    rows: Vec<BlrRow>,
    delta: f64,
    /// Number of rows the risk is split over (the state dimension).
    risk_split: usize,
    /// Chi-square degrees of freedom (defaults to the feature dimension).
    dof: usize,
}

impl Blr {
    pub fn new(means: Vec<DVector<f64>>, precisions: Vec<DMatrix<f64>>, sigmas: &[f64], delta: f64, risk_split: usize) -> Result<Self> {
        if means.len() != precisions.len() || means.len() != sigmas.len() || means.is_empty() {
            return Err(Error::dim("one mean, precision and noise scale per row"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument("risk tolerance must lie in (0, 1)".into()));
        }
        let dof = means[0].len();
        let rows = means
            .into_iter()
            .zip(precisions)
            .zip(sigmas)
            .map(|((m, p), &s)| BlrRow::new(m, p, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Blr {
            rows,
            delta,
            risk_split: risk_split.max(1),
            dof,
        })
    }

    /// Flat-prior initialization from warm-up data: `Λ(0) = εI + Σφφᵀ` and
    /// the regularized least-squares mean. `ys[k]` holds the targets of the
    /// estimated rows for sample `k`.
    pub fn from_data(phis: &[DVector<f64>], ys: &[DVector<f64>], eps: f64, sigmas: &[f64], delta: f64, risk_split: usize) -> Result<Self> {
        if phis.len() != ys.len() || phis.is_empty() {
            return Err(Error::InvalidArgument("warm-up data must be non-empty and paired".into()));
        }
        let d = phis[0].len();
        let r = sigmas.len();
        let mut lam = DMatrix::identity(d, d) * eps;
        let mut rhs = DMatrix::zeros(d, r);
        for (phi, y) in phis.iter().zip(ys) {
            if phi.len() != d || y.len() != r {
                return Err(Error::dim("warm-up sample shapes"));
            }
            lam += phi * phi.transpose();
            rhs += phi * y.transpose();
        }
        let chol = lam.clone().cholesky().ok_or_else(|| Error::Numerical("warm-up Gram matrix is singular".into()))?;
        let w = chol.solve(&rhs);
        let means = (0..r).map(|i| w.column(i).into_owned()).collect();
        Self::new(means, vec![lam; r], sigmas, delta, risk_split)
    }

    pub fn with_dof(mut self, dof: usize) -> Self {
        self.dof = dof.max(1);
        self
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &BlrRow {
        &self.rows[i]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn update(&mut self, phi: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.rows.len() {
            return Err(Error::dim("observation length"));
        }
        for (row, &yi) in self.rows.iter_mut().zip(y.iter()) {
            if phi.len() != row.mean.len() {
                return Err(Error::dim("feature length"));
            }
            row.update(phi, yi)?;
        }
        Ok(())
    }

    /// `β_t(δ/n) = sqrt(2 log(det Λ_t^{1/2} / (δ' det Λ_0^{1/2})))
    ///            + sqrt(λ_max(Λ_0)/λ_min(Λ_t) · χ²_dof(1 − δ'))`.
    pub fn beta(&self, i: usize) -> f64 {
        let row = &self.rows[i];
        let dp = self.delta / self.risk_split as f64;
        let log_term = (row.log_det() - row.log_det0 - 2.0 * dp.ln()).max(0.0);
        let ratio = row.lambda0_max / row.lambda_min();
        log_term.sqrt() + (ratio * chi_square_quantile(self.dof, 1.0 - dp)).sqrt()
    }

    /// Ellipsoid scale `σ_i β_t`.
    pub fn scale(&self, i: usize) -> f64 {
        self.rows[i].sigma * self.beta(i)
    }

    /// Largest error norm in the ellipsoid: `σ_i β_t / sqrt(λ_min(Λ_i))`.
    pub fn max_norm(&self, i: usize) -> f64 {
        self.scale(i) / self.rows[i].lambda_min().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_update_arithmetic() {
        let mut b = Blr::new(vec![DVector::zeros(1)], vec![DMatrix::identity(1, 1)], &[1.0], 0.05, 1).unwrap();
        b.update(&DVector::from_element(1, 1.0), &DVector::from_element(1, 1.0)).unwrap();
        assert_abs_diff_eq!(b.row(0).mean[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.row(0).lambda_inv[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_feature_is_a_no_op() {
        let mut b = Blr::new(vec![DVector::from_element(2, 0.3)], vec![DMatrix::identity(2, 2) * 2.0], &[1.0], 0.05, 1).unwrap();
        let before = b.row(0).clone();
        b.update(&DVector::zeros(2), &DVector::from_element(1, 5.0)).unwrap();
        assert_eq!(b.row(0).mean, before.mean);
        assert_eq!(b.row(0).lambda_inv, before.lambda_inv);
    }

    #[test]
    fn prior_beta_has_closed_form() {
        let b = Blr::new(vec![DVector::zeros(2)], vec![DMatrix::identity(2, 2)], &[1.0], 0.05, 2).unwrap();
        let dp: f64 = 0.025;
        let expect = (2.0 * (1.0 / dp).ln()).sqrt() + chi_square_quantile(2, 1.0 - dp).sqrt();
        assert_abs_diff_eq!(b.beta(0), expect, epsilon = 1e-12);
    }

    #[test]
    fn sequential_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let mut lam0 = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        lam0 = &lam0 * lam0.transpose() + DMatrix::identity(d, d);
        let m0 = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let mut b = Blr::new(vec![m0.clone()], vec![lam0.clone()], &[0.5], 0.05, 1).unwrap();
        let mut lam = lam0.clone();
        let mut rhs = &lam0 * &m0;
        for _ in 0..150 {
            let phi = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let y = rng.random_range(-2.0..2.0);
            b.update(&phi, &DVector::from_element(1, y)).unwrap();
            lam += &phi * phi.transpose();
            rhs += &phi * y;
        }
        let batch = lam.clone().cholesky().unwrap().solve(&rhs);
        assert!((&b.row(0).mean - batch).amax() <= 1e-8);
        assert!((&b.row(0).lambda_inv - lam.try_inverse().unwrap()).amax() <= 1e-8);
    }
}

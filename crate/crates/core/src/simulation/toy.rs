use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Blr, SetMembership};

/// Scalar regression `y = wᵀ[sin(4x₁), tanh(x₂)] + v + bias` with
/// `x ~ U[−1, 1]²` and `v ~ U[−h, h]`. A nonzero bias violates the bounded
/// noise model the set-membership estimator relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyProblem {
    pub w: Vec<f64>,
    pub noise_half_width: f64,
    #[serde(default)]
    pub bias: f64,
}

impl Default for ToyProblem {
    fn default() -> Self {
        ToyProblem {
            w: vec![0.5, 0.5],
            noise_half_width: 0.4,
            bias: 0.0,
        }
    }
}

impl ToyProblem {
    pub fn biased(bias: f64) -> Self {
        ToyProblem { bias, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != 2 {
            return Err(Error::config("toy.w", "needs exactly two entries"));
        }
        if !(self.noise_half_width > 0.0) {
            return Err(Error::config("toy.noise_half_width", "must be positive"));
        }
        Ok(())
    }

    pub fn features(x: &[f64; 2]) -> DVector<f64> {
        DVector::from_vec(vec![(4.0 * x[0]).sin(), x[1].tanh()])
    }

    pub fn true_w(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let x = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        let phi = Self::features(&x);
        let v = rng.random_range(-self.noise_half_width..=self.noise_half_width);
        let y = self.true_w().dot(&phi) + v + self.bias;
        (phi, y)
    }

    pub fn dataset<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> Vec<(DVector<f64>, f64)> {
        (0..steps).map(|_| self.sample(rng)).collect()
    }
}

/// Set-membership history on one dataset. `radii[t]` and `estimates[t]`
/// hold the state after `t` samples; `collapse` is the number of samples
/// after which the feasible set became empty.
#[derive(Debug, Clone, Serialize)]
pub struct SetMembershipTrace {
    pub radii: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub collapse: Option<usize>,
}

/// Runs set membership from `Θ(0) = {‖w‖_∞ ≤ 1}` with the noise bound
/// `noise_half_width`, stopping at the first empty feasible set.
pub fn toy_set_membership(problem: &ToyProblem, data: &[(DVector<f64>, f64)]) -> Result<SetMembershipTrace> {
    let mut sm = SetMembership::from_boxes(&DMatrix::zeros(1, 2), &DVector::from_element(1, 1.0), DVector::from_element(1, problem.noise_half_width))?;
    let (w, r) = sm.estimate()?;
    let mut trace = SetMembershipTrace {
        radii: vec![r[0]],
        estimates: vec![w.row(0).iter().copied().collect()],
        collapse: None,
    };
    for (t, (phi, y)) in data.iter().enumerate() {
        match sm.update(phi, &DVector::from_element(1, *y)) {
            Ok(()) => {}
            Err(Error::EmptyFeasibleSet { .. }) => {
                trace.collapse = Some(t + 1);
                break;
            }
            Err(e) => return Err(e),
        }
        let (w, r) = sm.estimate()?;
        trace.radii.push(r[0]);
        trace.estimates.push(w.row(0).iter().copied().collect());
    }
    Ok(trace)
}

/// Bayesian regression history on one dataset. `covered[t]` records whether
/// the true parameter lies in the confidence ellipsoid after `t` samples.
#[derive(Debug, Clone, Serialize)]
pub struct BlrTrace {
    pub radii: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub covered: Vec<bool>,
}

impl BlrTrace {
    pub fn covered_throughout(&self) -> bool {
        self.covered.iter().all(|&c| c)
    }
}

/// Runs the recursive Bayesian filter from a zero-mean isotropic prior
/// whose confidence set at `t = 0` is the unit ball.
pub fn toy_blr(problem: &ToyProblem, data: &[(DVector<f64>, f64)], delta: f64) -> Result<BlrTrace> {
    let sigma = problem.noise_half_width;
    let unit = Blr::new(vec![DVector::zeros(2)], vec![DMatrix::identity(2, 2)], &[sigma], delta, 1)?;
    let precision = unit.scale(0).powi(2);
    let mut blr = Blr::new(vec![DVector::zeros(2)], vec![DMatrix::identity(2, 2) * precision], &[sigma], delta, 1)?;
    let w_true = problem.true_w();
    let mut trace = BlrTrace {
        radii: Vec::with_capacity(data.len() + 1),
        estimates: Vec::with_capacity(data.len() + 1),
        covered: Vec::with_capacity(data.len() + 1),
    };
    let mut record = |blr: &Blr| {
        let row = blr.row(0);
        let err = &w_true - &row.mean;
        let scale = blr.scale(0);
        trace.radii.push(blr.max_norm(0));
        trace.estimates.push(row.mean.iter().copied().collect());
        trace.covered.push(err.dot(&(&row.lambda * &err)) <= scale * scale);
    };
    record(&blr);
    for (phi, y) in data {
        blr.update(phi, &DVector::from_element(1, *y))?;
        record(&blr);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::rng_for;

    #[test]
    fn prior_confidence_set_is_the_unit_ball() {
        let trace = toy_blr(&ToyProblem::default(), &[], 0.05).unwrap();
        assert!((trace.radii[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_set_membership_radius_is_the_box_diagonal() {
        let trace = toy_set_membership(&ToyProblem::default(), &[]).unwrap();
        assert!((trace.radii[0] - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn well_specified_set_membership_never_collapses() {
        let p = ToyProblem::default();
        let data = p.dataset(50, &mut rng_for(3));
        let trace = toy_set_membership(&p, &data).unwrap();
        assert!(trace.collapse.is_none());
        assert!(trace.radii.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}

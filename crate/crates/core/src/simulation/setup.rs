use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plant::Plant;
use crate::controller::{Controller, ControllerConfig, LinearSystem};
use crate::error::{Error, Result};
use crate::estimation::{Blr, EstimatorKind, OnlineEstimator, SetMembership};

/// How the online estimator is initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Bayesian linear regression. With `warmup > 0` the prior is the flat
    /// prior `εI` updated on warm-up data; otherwise it is `N(0, (λI)⁻¹)`.
    Blr {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        warmup: usize,
        #[serde(default = "default_eps")]
        prior_eps: f64,
        #[serde(default = "default_precision")]
        prior_precision: f64,
    },
    /// Set membership starting from `{‖w_i − center‖_∞ ≤ half_width}`,
    /// refined by `warmup` samples.
    SetMembership {
        half_width: f64,
        #[serde(default)]
        warmup: usize,
    },
    /// The true parameters, never updated.
    Exact,
}

fn default_delta() -> f64 {
    0.05
}

fn default_eps() -> f64 {
    1e-2
}

fn default_precision() -> f64 {
    1.0
}

impl EstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EstimatorSpec::Blr { delta, prior_eps, prior_precision, .. } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::config("estimator.delta", "must lie in (0, 1)"));
                }
                if !(prior_eps > 0.0) {
                    return Err(Error::config("estimator.prior_eps", "must be positive"));
                }
                if !(prior_precision > 0.0) {
                    return Err(Error::config("estimator.prior_precision", "must be positive"));
                }
                Ok(())
            }
            EstimatorSpec::SetMembership { half_width, .. } if !(half_width > 0.0) => Err(Error::config("estimator.half_width", "must be positive")),
            _ => Ok(()),
        }
    }
}

fn select(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&r| y[r]))
}

/// Builds the online estimator for `plant`, drawing warm-up data from `rng`.
pub fn build_estimator<R: Rng + ?Sized>(plant: &Plant, spec: &EstimatorSpec, rng: &mut R) -> Result<OnlineEstimator> {
    let n = plant.state_dim();
    let d = plant.features.dim();
    let rows = plant.estimated_rows.clone();
    let base = DMatrix::zeros(n, d);
    match *spec {
        EstimatorSpec::Exact => {
            let w = plant.w_true().ok_or_else(|| Error::config("estimator.kind", "exact estimator needs parameters in the feature span"))?;
            OnlineEstimator::new(EstimatorKind::Frozen, vec![], w)
        }
        EstimatorSpec::Blr {
            delta,
            warmup,
            prior_eps,
            prior_precision,
        } => {
            let sigma = plant.noise.sub_gaussian_scale();
            if sigma <= 0.0 {
                return Err(Error::config("plant.noise", "Bayesian regression needs a nonzero noise bound"));
            }
            let sigmas = vec![sigma; rows.len()];
            let blr = if warmup > 0 {
                let (phis, ys) = plant.warmup_data(warmup, rng);
                let ys: Vec<_> = ys.iter().map(|y| select(y, &rows)).collect();
                Blr::from_data(&phis, &ys, prior_eps, &sigmas, delta, n)?
            } else {
                let means = vec![DVector::zeros(d); rows.len()];
                let precisions = vec![DMatrix::identity(d, d) * prior_precision; rows.len()];
                Blr::new(means, precisions, &sigmas, delta, n)?
            };
            OnlineEstimator::new(EstimatorKind::Blr(blr), rows, base)
        }
        EstimatorSpec::SetMembership { half_width, warmup } => {
            let centers = DMatrix::zeros(rows.len(), d);
            let bound = plant.noise.bound();
            let mut sm = SetMembership::from_boxes(&centers, &DVector::from_element(rows.len(), half_width), DVector::from_element(rows.len(), bound))?;
            let (phis, ys) = plant.warmup_data(warmup, rng);
            for (phi, y) in phis.iter().zip(&ys) {
                sm.update(phi, &select(y, &rows))?;
            }
            OnlineEstimator::new(EstimatorKind::SetMembership(sm), rows, base)
        }
    }
}

/// The controller's view of the plant: known matrices, constraints and
/// noise box.
pub fn linear_system(plant: &Plant) -> LinearSystem {
    LinearSystem {
        a: plant.a.clone(),
        b: plant.b.clone(),
        x: plant.x.clone(),
        u: plant.u.clone(),
        v: plant.noise_box(),
    }
}

pub fn build_controller<R: Rng + ?Sized>(plant: &Plant, cfg: ControllerConfig, spec: &EstimatorSpec, rng: &mut R) -> Result<Controller> {
    let est = build_estimator(plant, spec, rng)?;
    Controller::new(cfg, linear_system(plant), plant.features.clone(), est)
}

//! Online estimators for `W` in `f(x) = Wφ(x)`.
//!
//! Each estimator publishes a point estimate `Ŵ(t)` together with per-row
//! confidence sets whose max-norms never grow.

mod blr;
mod features;
mod model;
mod set_membership;

pub use blr::{Blr, BlrRow};
pub use features::{Activation, FeatureMap, Layer, LoadedNetwork};
pub use model::{publish_gate, LinearParamModel, RowConfidence};
pub use set_membership::SetMembership;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Regression target `y = x⁺ − Ax − Bu`.
pub fn residual(x_next: &DVector<f64>, x: &DVector<f64>, u: &DVector<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    x_next - a * x - b * u
}

#[derive(Debug, Clone)]
pub enum EstimatorKind {
    SetMembership(SetMembership),
    Blr(Blr),
    /// No learning: the initial model is kept forever.
    Frozen,
}

/// Wraps an estimator over a subset of rows of `W`. Rows that are not
/// estimated are known exactly and keep their initial values with zero
/// confidence radius.
#[derive(Debug, Clone)]
pub struct OnlineEstimator {
    kind: EstimatorKind,
    estimated_rows: Vec<usize>,
    base: DMatrix<f64>,
    published: LinearParamModel,
    failure: Option<usize>,
}

impl OnlineEstimator {
    /// `base` supplies the known rows (and shapes `Ŵ`); estimated rows are
    /// overwritten from the estimator's state.
    pub fn new(kind: EstimatorKind, estimated_rows: Vec<usize>, base: DMatrix<f64>) -> Result<Self> {
        let n = base.nrows();
        if estimated_rows.iter().any(|&r| r >= n) {
            return Err(Error::dim("estimated row index out of range"));
        }
        let count = match &kind {
            EstimatorKind::SetMembership(sm) => Some((sm.num_rows(), sm.feature_dim())),
            EstimatorKind::Blr(b) => Some((b.num_rows(), b.row(0).mean.len())),
            EstimatorKind::Frozen => None,
        };
        if let Some((rows, d)) = count {
            if rows != estimated_rows.len() || d != base.ncols() {
                return Err(Error::dim("estimator rows/features do not match the model"));
            }
        }
        let mut est = OnlineEstimator {
            kind,
            estimated_rows,
            base: base.clone(),
            published: LinearParamModel::exact(base),
            failure: None,
        };
        est.published = est.candidate()?;
        Ok(est)
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn estimated_rows(&self) -> &[usize] {
        &self.estimated_rows
    }

    pub fn published(&self) -> &LinearParamModel {
        &self.published
    }

    /// Row index whose feasible set emptied, if the estimator has failed.
    pub fn failure(&self) -> Option<usize> {
        self.failure
    }

    /// The model implied by the current estimator state, before gating.
    pub fn candidate(&self) -> Result<LinearParamModel> {
        let mut model = LinearParamModel::exact(self.base.clone());
        match &self.kind {
            EstimatorKind::Frozen => {}
            EstimatorKind::SetMembership(sm) => {
                let (centers, radii) = sm.estimate()?;
                for (k, &r) in self.estimated_rows.iter().enumerate() {
                    model.w_hat.row_mut(r).copy_from(&centers.row(k));
                    model.radii[r] = radii[k];
                    model.confidence[r] = RowConfidence::Ball { radius: radii[k] };
                }
            }
            EstimatorKind::Blr(b) => {
                for (k, &r) in self.estimated_rows.iter().enumerate() {
                    model.w_hat.row_mut(r).copy_from(&b.row(k).mean.transpose());
                    model.radii[r] = b.max_norm(k);
                    model.confidence[r] = RowConfidence::Ellipsoid {
                        precision: b.row(k).lambda.clone(),
                        scale: b.scale(k),
                    };
                }
            }
        }
        Ok(model)
    }

    /// Processes one observation `y = Wφ + v` (full state length) and
    /// republishes through the gate. Returns whether a new model was
    /// published. After a set-membership collapse the estimator is frozen
    /// at its last published model and the error is returned once.
    pub fn update(&mut self, phi: &DVector<f64>, y: &DVector<f64>) -> Result<bool> {
        if self.failure.is_some() {
            return Ok(false);
        }
        let ys = DVector::from_iterator(self.estimated_rows.len(), self.estimated_rows.iter().map(|&r| y[r]));
        let res = match &mut self.kind {
            EstimatorKind::Frozen => return Ok(false),
            EstimatorKind::SetMembership(sm) => sm.update(phi, &ys),
            EstimatorKind::Blr(b) => b.update(phi, &ys),
        };
        if let Err(e) = res {
            if let Error::EmptyFeasibleSet { row } = e {
                self.failure = Some(self.estimated_rows[row]);
                return Err(Error::EmptyFeasibleSet { row: self.estimated_rows[row] });
            }
            return Err(e);
        }
        let cand = self.candidate()?;
        let before = self.published.radii.clone();
        self.published = publish_gate(cand, &self.published);
        Ok(self.published.radii != before || self.published.radii.is_empty())
    }
}

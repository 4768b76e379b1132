use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Confidence set `W_i(t)` on the error of one row estimate.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowConfidence {
    /// The row is known exactly.
    Known,
    /// `{w̃ : ‖w̃‖₂ ≤ radius}`.
    Ball { radius: f64 },
    /// `{w̃ : (w̃ᵀ Λ w̃)^{1/2} ≤ scale}`.
    Ellipsoid {
        #[serde(skip)]
        precision: DMatrix<f64>,
        scale: f64,
    },
}

/// Published estimate `f̂(x) = Ŵφ(x)` with per-row confidence sets.
#[derive(Debug, Clone, Serialize)]
pub struct LinearParamModel {
    #[serde(serialize_with = "ser_matrix")]
    pub w_hat: DMatrix<f64>,
    /// Max-norm of each row's confidence set.
    #[serde(serialize_with = "ser_vector")]
    pub radii: DVector<f64>,
    pub confidence: Vec<RowConfidence>,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

fn ser_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

impl LinearParamModel {
    /// A model whose rows are all known exactly.
    pub fn exact(w: DMatrix<f64>) -> Self {
        let n = w.nrows();
        LinearParamModel {
            w_hat: w,
            radii: DVector::zeros(n),
            confidence: vec![RowConfidence::Known; n],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.w_hat.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w_hat.ncols()
    }

    pub fn predict(&self, phi: &DVector<f64>) -> DVector<f64> {
        &self.w_hat * phi
    }

    /// True when `Ŵ − W` lies in every row's confidence set.
    pub fn covers(&self, w_true: &DMatrix<f64>) -> bool {
        (0..self.state_dim()).all(|i| {
            let err = (self.w_hat.row(i) - w_true.row(i)).transpose();
            match &self.confidence[i] {
                RowConfidence::Known => err.norm() <= 1e-12,
                RowConfidence::Ball { radius } => err.norm() <= radius + 1e-12,
                RowConfidence::Ellipsoid { precision, scale } => err.dot(&(precision * &err)).max(0.0).sqrt() <= scale + 1e-12,
            }
        })
    }
}

/// Publishes the candidate only if no row's confidence radius grew, so the
/// published confidence sets never widen.
pub fn publish_gate(candidate: LinearParamModel, current: &LinearParamModel) -> LinearParamModel {
    let shrunk = candidate.radii.len() == current.radii.len() && candidate.radii.iter().zip(current.radii.iter()).all(|(c, p)| c <= p);
    if shrunk {
        candidate
    } else {
        current.clone()
    }
}

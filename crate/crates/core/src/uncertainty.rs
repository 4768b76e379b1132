//! Adaptive uncertainty budget: support of the unknown term, the
//! estimation-error box, the compound disturbance box after certainty
//! equivalent cancellation, and the benchmark disturbance box.
//!
//! All sets are origin-symmetric boxes. Images under the projectors are
//! interval-arithmetic over-approximations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::LinearParamModel;
use crate::geometry::{Hyperbox, Polytope};

/// `B† = (BᵀB)⁻¹Bᵀ` and the projectors onto `Range(B)` and its complement.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub b_pinv: DMatrix<f64>,
    pub range: DMatrix<f64>,
    pub perp: DMatrix<f64>,
}

impl Projectors {
    pub fn new(b: &DMatrix<f64>) -> Result<Self> {
        let btb = b.transpose() * b;
        let chol = btb.cholesky().ok_or_else(|| Error::InvalidArgument("B must have full column rank".into()))?;
        let b_pinv = chol.solve(&b.transpose());
        let range = b * &b_pinv;
        let n = b.nrows();
        let perp = DMatrix::identity(n, n) - &range;
        Ok(Projectors { b_pinv, range, perp })
    }
}

/// `F(t)`: half-width `‖ŵ_i‖ + 2 r_i` per row, optionally clamped by a
/// known a-priori bound on `|f_i|`.
pub fn support_box_f(model: &LinearParamModel, clamp: Option<&DVector<f64>>) -> Hyperbox {
    let n = model.state_dim();
    let mut hw = DVector::from_fn(n, |i, _| model.w_hat.row(i).norm() + 2.0 * model.radii[i]);
    if let Some(c) = clamp {
        hw = hw.inf(c);
    }
    Hyperbox::symmetric(hw).expect("half-widths are nonnegative")
}

/// Running intersection `F̂(t) = F̂(t−1) ∩ F(t)` of centred boxes.
pub fn recursive_f_hat(prev: Option<&Hyperbox>, now: &Hyperbox) -> Hyperbox {
    match prev {
        None => now.clone(),
        Some(p) => Hyperbox::symmetric(p.half_widths().inf(now.half_widths())).expect("half-widths are nonnegative"),
    }
}

/// `D(t)`: half-widths are the published confidence max-norms.
pub fn error_box_d(model: &LinearParamModel) -> Hyperbox {
    Hyperbox::symmetric(model.radii.clone()).expect("radii are nonnegative")
}

/// `D̂ = (I − BB†)F̂ ⊕ BB†D ⊕ V` as a box.
pub fn compound_d_hat(proj: &Projectors, f_hat: &Hyperbox, d_err: &Hyperbox, v: &Hyperbox) -> Result<Hyperbox> {
    f_hat.linear_map(&proj.perp)?.minkowski_sum(&d_err.linear_map(&proj.range)?)?.minkowski_sum(v)
}

/// Benchmark disturbance set `D' = F̂ ⊕ V`.
pub fn benchmark_d_prime(f_hat: &Hyperbox, v: &Hyperbox) -> Result<Hyperbox> {
    f_hat.minkowski_sum(v)
}

/// `U ⊖ B†F̂`; may be empty.
pub fn input_tightening(u: &Polytope, b_pinv: &DMatrix<f64>, f_hat: &Hyperbox) -> Result<Polytope> {
    u.pontryagin_diff(&f_hat.linear_map(b_pinv)?)
}

/// Realized compound disturbance `d = v + BB†(f − f̂) + (I − BB†)f`.
pub fn compound_disturbance(proj: &Projectors, f: &DVector<f64>, f_hat: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    v + &proj.range * (f - f_hat) + &proj.perp * f
}

/// One snapshot of the adaptive sets.
#[derive(Debug, Clone, Serialize)]
pub struct UncertaintyBudget {
    pub f_now: Hyperbox,
    pub f_hat: Hyperbox,
    pub d_err: Hyperbox,
    pub d_hat: Hyperbox,
    pub d_bench: Hyperbox,
    pub v: Hyperbox,
}

/// Outcome of comparing a new budget with its predecessor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NestingReport {
    pub f_hat: bool,
    pub d_err: bool,
    pub d_hat: bool,
    pub d_bench: bool,
}

impl NestingReport {
    pub fn all(&self) -> bool {
        self.f_hat && self.d_err && self.d_hat && self.d_bench
    }
}

impl UncertaintyBudget {
    /// Builds the budget for the published model, intersecting with the
    /// previous `F̂` when one is given.
    pub fn build(
        model: &LinearParamModel,
        prev: Option<&UncertaintyBudget>,
        proj: &Projectors,
        v: &Hyperbox,
        clamp: Option<&DVector<f64>>,
    ) -> Result<Self> {
        let n = model.state_dim();
        if v.dim() != n {
            return Err(Error::dim("noise box dimension"));
        }
        if v.center().amax() > 0.0 {
            return Err(Error::InvalidArgument("noise box must be centred at the origin".into()));
        }
        let f_now = support_box_f(model, clamp);
        let f_hat = recursive_f_hat(prev.map(|p| &p.f_hat), &f_now);
        let d_err = error_box_d(model);
        let d_hat = compound_d_hat(proj, &f_hat, &d_err, v)?;
        let d_bench = benchmark_d_prime(&f_hat, v)?;
        Ok(UncertaintyBudget {
            f_now,
            f_hat,
            d_err,
            d_hat,
            d_bench,
            v: v.clone(),
        })
    }

    /// Checks `self ⊆ prev` for each of the nested sets at tolerance `tol`.
    pub fn nested_in(&self, prev: &UncertaintyBudget, tol: f64) -> NestingReport {
        let sub = |a: &Hyperbox, b: &Hyperbox| a.half_widths().iter().zip(b.half_widths().iter()).all(|(x, y)| *x <= y + tol);
        NestingReport {
            f_hat: sub(&self.f_hat, &prev.f_hat),
            d_err: sub(&self.d_err, &prev.d_err),
            d_hat: sub(&self.d_hat, &prev.d_hat),
            d_bench: sub(&self.d_bench, &prev.d_bench),
        }
    }

    /// SHA-256 of the serialized snapshot; equal budgets hash equal.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("budget serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

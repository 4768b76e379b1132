//! Dense LP and strictly convex QP backends, plus the LQR and chi-square
//! helpers used by the estimators and terminal-ingredient construction.
//!
//! Both solvers are deterministic: pivoting and active-set selection use
//! fixed orderings, so identical inputs give bit-identical outputs.

mod chi2;
mod lp;
mod qp;
mod riccati;

pub use chi2::{chi_square_cdf, chi_square_quantile};
pub use lp::{solve_lp, solve_lp_with, LpOptions};
pub use qp::{solve_qp, solve_qp_with, QpOptions, QuadraticProgram};
pub use riccati::{dlqr, riccati_residual, spectral_radius, Lqr};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveKind {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Outcome of an LP or QP solve.
///
/// `dual` holds the multipliers of the inequality rows followed by the
/// equality rows, with the sign convention `∇f + A_inᵀλ + A_eqᵀμ = 0`,
/// `λ ≥ 0`.
#[derive(Debug, Clone)]
pub struct SolveStatus {
    pub kind: SolveKind,
    pub objective: f64,
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        self.kind == SolveKind::Optimal
    }

    pub(crate) fn failed(kind: SolveKind, n: usize, m: usize, iterations: usize) -> Self {
        SolveStatus {
            kind,
            objective: match kind {
                SolveKind::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            primal: DVector::zeros(n),
            dual: DVector::zeros(m),
            kkt_residual: f64::INFINITY,
            iterations,
        }
    }
}

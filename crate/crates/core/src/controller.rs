//! Closed-loop policies: the certainty-equivalent adaptive controller with
//! its three refresh schedules, the benchmark adaptive tube controller and a
//! tube controller that ignores the unknown term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{residual, FeatureMap, LinearParamModel, OnlineEstimator};
use crate::geometry::{Hyperbox, Polytope};
use crate::invariant::InvariantSet;
use crate::mpc::{self, FeedbackMode, MpcSolution, RobustMpcProblem};
use crate::optimization::{dlqr, Lqr, SolveKind};
use crate::uncertainty::{input_tightening, NestingReport, Projectors, UncertaintyBudget};

/// Inclusion tolerance for terminal-set nesting checks.
pub const NESTING_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Sets and terminal set refreshed every step.
    AdaptiveA,
    /// Sets refreshed every step, terminal set between episodes.
    AdaptiveB,
    /// Everything refreshed between episodes only.
    AdaptiveC,
    /// Tube MPC on `F̂ ⊕ V` with the full input set and no cancellation.
    Benchmark,
    /// Tube MPC on `V` alone; falls back to saturated LQR when infeasible.
    NaiveTube,
}

impl Variant {
    pub fn is_certainty_equivalent(self) -> bool {
        matches!(self, Variant::AdaptiveA | Variant::AdaptiveB | Variant::AdaptiveC)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::AdaptiveA => "adaptive_a",
            Variant::AdaptiveB => "adaptive_b",
            Variant::AdaptiveC => "adaptive_c",
            Variant::Benchmark => "benchmark",
            Variant::NaiveTube => "naive_tube",
        }
    }
}

/// The known linear part, constraints and noise box.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub x: Polytope,
    pub u: Polytope,
    pub v: Hyperbox,
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub variant: Variant,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Freeze the disturbance feedback to the LQR tube gain.
    pub fixed_gain: bool,
    /// Known a-priori bound on `|f_i|`, intersected into `F`.
    pub f_clamp: Option<DVector<f64>>,
}

/// The sets the MPC problem is currently built from.
#[derive(Debug, Clone)]
struct ActiveSets {
    budget: UncertaintyBudget,
    disturbance: Hyperbox,
    u_eff: Polytope,
    terminal: Option<InvariantSet>,
    fingerprint: String,
}

/// Per-step output of [`Controller::step`].
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    #[serde(serialize_with = "ser_kind")]
    pub status: SolveKind,
    #[serde(serialize_with = "ser_vec")]
    pub u0: DVector<f64>,
    /// `f̂(x)` of the published model (zeros for controllers without one).
    #[serde(serialize_with = "ser_vec")]
    pub f_hat: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub budget_id: String,
    /// True when the input came from the fallback LQR law.
    pub fallback: bool,
    /// True once the estimator has failed and the model is frozen.
    pub guarantees_void: bool,
}

fn ser_kind<S: serde::Serializer>(k: &SolveKind, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match k {
        SolveKind::Optimal => "optimal",
        SolveKind::Infeasible => "infeasible",
        SolveKind::Unbounded => "unbounded",
        SolveKind::MaxIter => "max_iter",
    })
}

fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

/// Outcome of [`Controller::observe`].
#[derive(Debug, Clone, Default)]
pub struct UpdateReport {
    pub published: bool,
    /// Nesting of the refreshed sets relative to the previous ones.
    pub nesting: Option<NestingReport>,
    /// Whether the previous terminal set lies inside the refreshed one.
    pub terminal_nested: Option<bool>,
    /// Set when the estimator failed during this update.
    pub estimator_error: Option<String>,
}

/// `u = u0 − B†Ŵφ`.
pub fn ce_policy(u0: &DVector<f64>, b_pinv: &DMatrix<f64>, model: &LinearParamModel, phi: &DVector<f64>) -> DVector<f64> {
    u0 - b_pinv * model.predict(phi)
}

/// Uniform closed-loop controller. Call [`step`](Self::step) to get an
/// input, then [`observe`](Self::observe) with the successor state.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    sys: LinearSystem,
    proj: Projectors,
    lqr: Lqr,
    features: FeatureMap,
    estimator: OnlineEstimator,
    /// Budget tracking the published model at every step.
    latest: UncertaintyBudget,
    active: ActiveSets,
    fallback_box: Option<Hyperbox>,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, sys: LinearSystem, features: FeatureMap, estimator: OnlineEstimator) -> Result<Self> {
        let n = sys.a.nrows();
        if sys.b.nrows() != n || sys.x.dim() != n || sys.u.dim() != sys.b.ncols() || sys.v.dim() != n {
            return Err(Error::dim("system matrices and sets"));
        }
        if estimator.published().state_dim() != n || estimator.published().feature_dim() != features.dim() {
            return Err(Error::dim("model shape does not match the system and features"));
        }
        let proj = Projectors::new(&sys.b)?;
        let lqr = dlqr(&sys.a, &sys.b, &cfg.q, &cfg.r)?;
        let latest = UncertaintyBudget::build(estimator.published(), None, &proj, &sys.v, cfg.f_clamp.as_ref())?;
        let fallback_box = match cfg.variant {
            Variant::NaiveTube => Some(sys.u.bounding_box()?),
            _ => None,
        };
        let active = Self::make_active(&cfg, &sys, &proj, &lqr, latest.clone(), None)?;
        Ok(Controller {
            cfg,
            sys,
            proj,
            lqr,
            features,
            estimator,
            latest,
            active,
            fallback_box,
        })
    }

    /// Builds the MPC sets for `budget`. When `keep_terminal` is given the
    /// terminal set is reused instead of recomputed.
    fn make_active(
        cfg: &ControllerConfig,
        sys: &LinearSystem,
        proj: &Projectors,
        lqr: &Lqr,
        budget: UncertaintyBudget,
        keep_terminal: Option<Option<InvariantSet>>,
    ) -> Result<ActiveSets> {
        let (disturbance, u_eff) = match cfg.variant {
            Variant::AdaptiveA | Variant::AdaptiveB | Variant::AdaptiveC => (budget.d_hat.clone(), input_tightening(&sys.u, &proj.b_pinv, &budget.f_hat)?),
            Variant::Benchmark => (budget.d_bench.clone(), sys.u.clone()),
            Variant::NaiveTube => (budget.v.clone(), sys.u.clone()),
        };
        let terminal = match keep_terminal {
            Some(t) => t,
            None if u_eff.is_empty() => None,
            None => {
                let a_cl = &sys.a - &sys.b * &lqr.k;
                crate::invariant::max_rpi(&a_cl, &disturbance, &sys.x, &u_eff, &lqr.k)?
            }
        };
        let fingerprint = budget.fingerprint();
        Ok(ActiveSets {
            budget,
            disturbance,
            u_eff,
            terminal,
            fingerprint,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn system(&self) -> &LinearSystem {
        &self.sys
    }

    pub fn projectors(&self) -> &Projectors {
        &self.proj
    }

    pub fn estimator(&self) -> &OnlineEstimator {
        &self.estimator
    }

    pub fn model(&self) -> &LinearParamModel {
        self.estimator.published()
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    /// Budget the MPC problem is currently built from.
    pub fn active_budget(&self) -> &UncertaintyBudget {
        &self.active.budget
    }

    /// Budget of the latest published model.
    pub fn latest_budget(&self) -> &UncertaintyBudget {
        &self.latest
    }

    /// Per-step disturbance box used by the MPC problem.
    pub fn active_disturbance(&self) -> &Hyperbox {
        &self.active.disturbance
    }

    pub fn active_input_set(&self) -> &Polytope {
        &self.active.u_eff
    }

    pub fn terminal_set(&self) -> Option<&InvariantSet> {
        self.active.terminal.as_ref()
    }

    pub fn budget_id(&self) -> &str {
        &self.active.fingerprint
    }

    /// The robust MPC problem for the active sets, or `None` when the
    /// terminal set is empty.
    pub fn problem(&self) -> Option<RobustMpcProblem> {
        let terminal = self.active.terminal.as_ref()?;
        let feedback = if self.cfg.fixed_gain {
            FeedbackMode::Fixed(self.lqr.k.clone())
        } else {
            FeedbackMode::Optimized
        };
        Some(RobustMpcProblem {
            a: self.sys.a.clone(),
            b: self.sys.b.clone(),
            horizon: self.cfg.horizon,
            q: self.cfg.q.clone(),
            r: self.cfg.r.clone(),
            p: self.lqr.p.clone(),
            k_term: self.lqr.k.clone(),
            x: self.sys.x.clone(),
            u: self.active.u_eff.clone(),
            d: self.active.disturbance.clone(),
            terminal: terminal.set.clone(),
            feedback,
        })
    }

    /// Solves the MPC problem at `x`, returning `None` for the solution when
    /// the problem cannot be formed.
    pub fn solve_mpc(&self, x: &DVector<f64>) -> Result<Option<MpcSolution>> {
        match self.problem() {
            None => Ok(None),
            Some(p) => mpc::solve(&p, x).map(Some),
        }
    }

    /// Computes the input at state `x` with exogenous signal `z`.
    pub fn step(&self, x: &DVector<f64>, z: Option<&DVector<f64>>) -> Result<(DVector<f64>, StepDiagnostics)> {
        let m = self.sys.b.ncols();
        let n = self.sys.a.nrows();
        let sol = self.solve_mpc(x)?;
        let (status, u0, objective, kkt) = match &sol {
            Some(s) => (s.status, s.u0.clone(), s.objective, s.kkt_residual),
            None => (SolveKind::Infeasible, DVector::zeros(m), f64::INFINITY, f64::INFINITY),
        };
        let mut fallback = false;
        let (u, f_hat) = if self.cfg.variant.is_certainty_equivalent() {
            let phi = self.features.eval(x, z);
            let model = self.estimator.published();
            (ce_policy(&u0, &self.proj.b_pinv, model, &phi), model.predict(&phi))
        } else if self.cfg.variant == Variant::NaiveTube && status != SolveKind::Optimal {
            fallback = true;
            let bb = self.fallback_box.as_ref().expect("naive tube keeps the input box");
            let raw = -(&self.lqr.k * x);
            (raw.sup(&bb.lower()).inf(&bb.upper()), DVector::zeros(n))
        } else {
            (u0.clone(), DVector::zeros(n))
        };
        Ok((
            u,
            StepDiagnostics {
                status,
                u0,
                f_hat,
                objective,
                kkt_residual: kkt,
                budget_id: self.active.fingerprint.clone(),
                fallback,
                guarantees_void: self.estimator.failure().is_some(),
            },
        ))
    }

    /// Feeds the transition `(x, u) → x_next` to the estimator and refreshes
    /// the sets according to the variant.
    pub fn observe(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>, z: Option<&DVector<f64>>) -> Result<UpdateReport> {
        let mut report = UpdateReport::default();
        let phi = self.features.eval(x, z);
        let y = residual(x_next, x, u, &self.sys.a, &self.sys.b);
        match self.estimator.update(&phi, &y) {
            Ok(p) => report.published = p,
            Err(e @ Error::EmptyFeasibleSet { .. }) => report.estimator_error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        let next = UncertaintyBudget::build(self.estimator.published(), Some(&self.latest), &self.proj, &self.sys.v, self.cfg.f_clamp.as_ref())?;
        self.latest = next;
        match self.cfg.variant {
            Variant::AdaptiveA | Variant::Benchmark => self.refresh(true, &mut report)?,
            Variant::AdaptiveB => self.refresh(false, &mut report)?,
            Variant::AdaptiveC | Variant::NaiveTube => {}
        }
        Ok(report)
    }

    /// Episode boundary: every variant adopts the latest budget and terminal
    /// set.
    pub fn end_episode(&mut self) -> Result<UpdateReport> {
        let mut report = UpdateReport::default();
        if self.cfg.variant != Variant::NaiveTube {
            self.refresh(true, &mut report)?;
        }
        Ok(report)
    }

    fn refresh(&mut self, terminal: bool, report: &mut UpdateReport) -> Result<()> {
        let latest_id = self.latest.fingerprint();
        if latest_id == self.active.fingerprint {
            return Ok(());
        }
        report.nesting = Some(self.latest.nested_in(&self.active.budget, NESTING_TOL));
        let keep = if terminal { None } else { Some(self.active.terminal.clone()) };
        let next = Self::make_active(&self.cfg, &self.sys, &self.proj, &self.lqr, self.latest.clone(), keep)?;
        if terminal {
            report.terminal_nested = Some(match (&self.active.terminal, &next.terminal) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(old), Some(new)) => new.set.contains_tol(&old.set, NESTING_TOL),
            });
        }
        self.active = next;
        Ok(())
    }

    /// Realized compound disturbance `x⁺ − Ax − Bu0`.
    pub fn realized_disturbance(&self, x: &DVector<f64>, u0: &DVector<f64>, x_next: &DVector<f64>) -> DVector<f64> {
        x_next - &self.sys.a * x - &self.sys.b * u0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{Blr, EstimatorKind};
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn di_system() -> LinearSystem {
        LinearSystem {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            x: Hyperbox::symmetric(v(&[4.0, 3.0])).unwrap().to_polytope(),
            u: Hyperbox::symmetric(v(&[2.0])).unwrap().to_polytope(),
            v: Hyperbox::zero(2),
        }
    }

    fn cfg(variant: Variant) -> ControllerConfig {
        ControllerConfig {
            variant,
            horizon: 3,
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
            fixed_gain: false,
            f_clamp: None,
        }
    }

    #[test]
    fn ce_policy_arithmetic() {
        let b_pinv = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let model = LinearParamModel::exact(DMatrix::from_row_slice(2, 1, &[0.0, 0.5]));
        let phi = DVector::from_element(1, 2f64.tanh());
        let u = ce_policy(&v(&[0.3]), &b_pinv, &model, &phi);
        assert_abs_diff_eq!(u[0], 0.3 - 0.4820, epsilon = 1e-4);
        let zero = LinearParamModel::exact(DMatrix::zeros(2, 1));
        assert_eq!(ce_policy(&v(&[0.3]), &b_pinv, &zero, &phi)[0], 0.3);
    }

    #[test]
    fn exact_matched_model_recovers_nominal_mpc() {
        let sys = di_system();
        let w = DMatrix::from_row_slice(2, 1, &[0.0, 0.5]);
        let est = OnlineEstimator::new(EstimatorKind::Frozen, vec![], w.clone()).unwrap();
        let mut ctrl = Controller::new(cfg(Variant::AdaptiveA), sys.clone(), FeatureMap::Tanh { index: 1 }, est).unwrap();
        let nominal_est = OnlineEstimator::new(EstimatorKind::Frozen, vec![], DMatrix::zeros(2, 1)).unwrap();
        // The linear comparison uses the input set tightened by B†F̂ = 0.5.
        let tight = LinearSystem {
            u: Hyperbox::symmetric(v(&[1.5])).unwrap().to_polytope(),
            ..sys.clone()
        };
        let nominal = Controller::new(cfg(Variant::AdaptiveA), tight, FeatureMap::Tanh { index: 1 }, nominal_est).unwrap();
        let mut x = v(&[2.0, 2.0]);
        let mut xn = x.clone();
        for _ in 0..30 {
            let (u, d) = ctrl.step(&x, None).unwrap();
            assert_eq!(d.status, SolveKind::Optimal);
            let next = &sys.a * &x + &sys.b * &u + &w * x[1].tanh();
            ctrl.observe(&x, &u, &next, None).unwrap();
            x = next;
            let (un, _) = nominal.step(&xn, None).unwrap();
            xn = &sys.a * &xn + &sys.b * un;
            assert!((&x - &xn).amax() < 1e-7);
        }
    }

    #[test]
    fn variant_c_keeps_budget_within_episode() {
        let sys = LinearSystem {
            v: Hyperbox::symmetric(v(&[0.01, 0.01])).unwrap(),
            ..di_system()
        };
        let blr = Blr::new(vec![DVector::zeros(1)], vec![DMatrix::identity(1, 1) * 4.0], &[0.01], 0.05, 2).unwrap();
        let est = OnlineEstimator::new(EstimatorKind::Blr(blr), vec![1], DMatrix::zeros(2, 1)).unwrap();
        let mut ctrl = Controller::new(cfg(Variant::AdaptiveC), sys.clone(), FeatureMap::Tanh { index: 1 }, est).unwrap();
        let id0 = ctrl.budget_id().to_string();
        let mut x = v(&[1.0, 1.0]);
        for _ in 0..5 {
            let (u, d) = ctrl.step(&x, None).unwrap();
            assert_eq!(d.budget_id, id0);
            let next = &sys.a * &x + &sys.b * &u + v(&[0.0, 0.5 * x[1].tanh()]);
            ctrl.observe(&x, &u, &next, None).unwrap();
            x = next;
        }
        assert_eq!(ctrl.budget_id(), id0);
        ctrl.end_episode().unwrap();
        assert_ne!(ctrl.budget_id(), id0);
    }
}

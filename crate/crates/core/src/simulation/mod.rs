//! Ground-truth plants, noise, the closed-loop runner, run logs and the
//! feasible-envelope metric.

mod envelope;
mod log;
mod noise;
mod plant;
mod runner;
mod setup;
mod toy;

pub use envelope::{convex_hull, feasible_envelope, shoelace_area};
pub use log::{RunLog, RunMetrics, StepRecord, RUNLOG_SCHEMA};
pub use noise::{NoiseModel, TRUNCATION};
pub use plant::{make_cruise, make_double_integrator, make_quadrotor, CruiseParams, Plant, QuadrotorParams, Route, Truth, WindField, GRAVITY};
pub use runner::{rng_for, run_campaign, run_episode, run_episodes, CONSTRAINT_TOL, TAIL_WINDOW};
pub use setup::{build_controller, build_estimator, linear_system, EstimatorSpec};
pub use toy::{toy_blr, toy_set_membership, BlrTrace, SetMembershipTrace, ToyProblem};

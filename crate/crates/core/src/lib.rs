//! Adaptive robust model predictive control for systems with an unknown
//! term that is linear in known features. The controller cancels the
//! estimated matched part of the term, bounds the remaining compound
//! disturbance from the estimator's confidence set, and plans with robust
//! MPC against that bound.
//!
//! Modules from the bottom up: [`geometry`] (boxes and polytopes),
//! [`optimization`] (LP, QP, Riccati), [`invariant`] (maximal RPI sets),
//! [`estimation`] (Bayesian regression and set membership),
//! [`uncertainty`] (disturbance budgets), [`mpc`] (the robust QP),
//! [`controller`], [`simulation`] (plants and campaigns), [`config`] and
//! [`cli`].

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod invariant;
pub mod mpc;
pub mod optimization;
pub mod simulation;
pub mod uncertainty;

pub use error::{Error, Result};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::log::{RunLog, RunMetrics, StepRecord};
use super::plant::Plant;
use crate::controller::{Controller, Variant};
use crate::error::{Error, Result};
use crate::optimization::SolveKind;

/// Membership tolerance for state and input constraints.
pub const CONSTRAINT_TOL: f64 = 1e-7;
/// Window of the tail statistics.
pub const TAIL_WINDOW: usize = 50;

/// Deterministic per-run random stream.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs one episode of `steps` steps from `x0`. The run stops early at the
/// first infeasible MPC problem unless the controller has a fallback.
pub fn run_episode(plant: &Plant, ctrl: &mut Controller, x0: &DVector<f64>, steps: usize, seed: u64, episode: usize, rng: &mut ChaCha8Rng) -> Result<RunLog> {
    let variant = ctrl.config().variant;
    let w_true = plant.w_true();
    let q = ctrl.config().q.clone();
    let r = ctrl.config().r.clone();
    let mut metrics = RunMetrics::default();
    let mut records = Vec::with_capacity(steps);
    let mut x = x0.clone();
    let mut z = plant.z_init();
    let mut norms = vec![x.norm()];
    let mut pos_err = Vec::new();
    let mut covered_all = w_true.as_ref().map(|w| ctrl.model().covers(w));
    let planar = plant.name == "quadrotor";
    if planar {
        pos_err.push((x[0] * x[0] + x[1] * x[1]).sqrt());
    }
    for t in 0..steps {
        let active_d = ctrl.active_disturbance().clone();
        let (u, diag) = ctrl.step(&x, z.as_ref())?;
        metrics.max_kkt_residual = metrics.max_kkt_residual.max(if diag.kkt_residual.is_finite() { diag.kkt_residual } else { 0.0 });
        if diag.status != SolveKind::Optimal && !diag.fallback {
            metrics.infeasible_step = Some(t);
            break;
        }
        if diag.fallback {
            metrics.fallback_steps += 1;
        }
        if plant.u.max_violation(&u) > CONSTRAINT_TOL {
            metrics.input_violations += 1;
        }
        let (x_next, noise) = plant.step(&x, &u, z.as_ref(), rng);
        let d = ctrl.realized_disturbance(&x, &diag.u0, &x_next);
        let d_contained = active_d.contains_point(&d);
        if !d_contained && variant != Variant::NaiveTube && !diag.fallback {
            metrics.containment_violations += 1;
        }
        metrics.cost += x.dot(&(&q * &x)) + u.dot(&(&r * &u));
        if let Some(route) = &plant.route {
            let acc = (&x_next - &noise - &x)[0] / route.dt;
            metrics.squared_acceleration += acc * acc;
        }
        let report = ctrl.observe(&x, &u, &x_next, z.as_ref())?;
        if report.estimator_error.is_some() && metrics.estimator_failure_step.is_none() {
            metrics.estimator_failure_step = Some(t);
        }
        if report.nesting.is_some_and(|n| !n.all()) {
            metrics.nesting_violations += 1;
        }
        if report.terminal_nested == Some(false) {
            metrics.terminal_nesting_violations += 1;
        }
        let covered = w_true.as_ref().map(|w| ctrl.model().covers(w));
        if let (Some(all), Some(c)) = (covered_all.as_mut(), covered) {
            *all &= c;
        }
        records.push(StepRecord {
            t,
            x: x.as_slice().to_vec(),
            u: u.as_slice().to_vec(),
            u0: diag.u0.as_slice().to_vec(),
            f_hat: diag.f_hat.as_slice().to_vec(),
            d: d.as_slice().to_vec(),
            status: format!("{:?}", diag.status).to_lowercase(),
            objective: diag.objective,
            budget_id: diag.budget_id,
            d_contained,
            covered,
        });
        let z_next = plant.z_next(z.as_ref(), &x);
        x = x_next;
        z = z_next;
        if plant.x.max_violation(&x) > CONSTRAINT_TOL {
            metrics.state_violations += 1;
        }
        norms.push(x.norm());
        if planar {
            pos_err.push((x[0] * x[0] + x[1] * x[1]).sqrt());
        }
        metrics.steps += 1;
    }
    let tail = &norms[norms.len().saturating_sub(TAIL_WINDOW)..];
    metrics.tail_mean_norm = tail.iter().sum::<f64>() / tail.len() as f64;
    if !pos_err.is_empty() {
        metrics.mean_position_error = pos_err.iter().sum::<f64>() / pos_err.len() as f64;
    }
    metrics.confidence_event = covered_all;
    Ok(RunLog {
        run_id: format!("{}_{}_s{}_e{}", plant.name, variant.name(), seed, episode),
        seed,
        plant: plant.name.clone(),
        variant: variant.name().into(),
        episode,
        records,
        final_state: x.as_slice().to_vec(),
        metrics,
    })
}

/// Runs `episodes` episodes from the plant's initial state, keeping the
/// estimator across episodes and refreshing the controller's sets at each
/// boundary.
pub fn run_episodes(plant: &Plant, ctrl: &mut Controller, episodes: usize, steps: usize, seed: u64, rng: &mut ChaCha8Rng) -> Result<Vec<RunLog>> {
    let mut logs = Vec::with_capacity(episodes);
    for e in 0..episodes {
        if e > 0 {
            ctrl.end_episode()?;
        }
        logs.push(run_episode(plant, ctrl, &plant.x0, steps, seed, e, rng)?);
    }
    Ok(logs)
}

/// Runs `job` for each seed in parallel on at most `jobs` threads (all
/// cores when `None`); results keep the seed order.
pub fn run_campaign<T, F>(seeds: &[u64], jobs: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| job(s)).collect())
}

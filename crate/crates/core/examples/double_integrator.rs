//! Closed-loop adaptive CE control of the matched double integrator with a
//! Bayesian regression estimator, over several seeds.
//!
//! Run with `cargo run --release --example double_integrator [seeds]`.

use armpc::controller::{ControllerConfig, Variant};
use armpc::simulation::{build_controller, make_double_integrator, rng_for, run_campaign, run_episode, EstimatorSpec, NoiseModel};
use nalgebra::DMatrix;

fn main() -> armpc::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let plant = make_double_integrator(true, 0.5, 0.0, NoiseModel::TruncatedGaussian { variance: 5e-3 });
    let spec = EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 45,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    };
    let start = std::time::Instant::now();
    let ids: Vec<u64> = (0..seeds).collect();
    let logs = run_campaign(&ids, None, |seed| {
        let mut rng = rng_for(seed);
        let cfg = ControllerConfig {
            variant: Variant::AdaptiveA,
            horizon: 3,
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
            fixed_gain: false,
            f_clamp: None,
        };
        let mut ctrl = build_controller(&plant, cfg, &spec, &mut rng)?;
        run_episode(&plant, &mut ctrl, &plant.x0, 50, seed, 0, &mut rng)
    })?;
    for log in &logs {
        let m = &log.metrics;
        println!(
            "seed {:3}: steps {:2} cost {:8.3} infeasible {:?} violations {}/{} covered {:?} nesting {} terminal {} containment {} tail |x| {:.4}",
            log.seed, m.steps, m.cost, m.infeasible_step, m.state_violations, m.input_violations, m.confidence_event, m.nesting_violations, m.terminal_nesting_violations, m.containment_violations, m.tail_mean_norm
        );
    }
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}

//! Cruise control over a hilly route: ride quality of certainty-equivalent
//! control against the benchmark.
//!
//! Run with `cargo run --release --example cruise [seeds]`.

use armpc::controller::{ControllerConfig, Variant};
use armpc::simulation::{build_controller, make_cruise, rng_for, run_campaign, run_episode, CruiseParams, EstimatorSpec, NoiseModel, GRAVITY};
use nalgebra::{DMatrix, DVector};

fn main() -> armpc::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let params = CruiseParams::default();
    let plant = make_cruise(&params, NoiseModel::TruncatedGaussian { variance: 1e-3 });
    let spec = EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 400,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    };
    // Grade force per step for a road never steeper than 5 degrees.
    let clamp = DVector::from_element(1, params.dt * GRAVITY * 5f64.to_radians().sin());
    let ids: Vec<u64> = (0..seeds).collect();
    for variant in [Variant::AdaptiveA, Variant::Benchmark] {
        let logs = run_campaign(&ids, None, |seed| {
            let mut rng = rng_for(seed);
            let cfg = ControllerConfig {
                variant,
                horizon: 5,
                q: DMatrix::identity(1, 1),
                r: DMatrix::identity(1, 1),
                fixed_gain: false,
                f_clamp: Some(clamp.clone()),
            };
            let mut ctrl = build_controller(&plant, cfg, &spec, &mut rng)?;
            run_episode(&plant, &mut ctrl, &plant.x0, 260, seed, 0, &mut rng)
        })?;
        let acc: f64 = logs.iter().map(|l| l.metrics.squared_acceleration).sum::<f64>() / logs.len() as f64;
        let infeasible = logs.iter().filter(|l| l.metrics.infeasible_step.is_some()).count();
        println!("{:<11} mean squared acceleration {acc:.3}, infeasible runs {infeasible}/{seeds}", variant.name());
    }
    Ok(())
}

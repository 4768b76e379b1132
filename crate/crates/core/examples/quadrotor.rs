//! Planar quadrotor in a wind field: certainty-equivalent control against a
//! tube controller that ignores the wind and the benchmark.
//!
//! Run with `cargo run --release --example quadrotor [wind angle in degrees]`.

use armpc::controller::{ControllerConfig, Variant};
use armpc::simulation::{build_controller, make_quadrotor, rng_for, run_episode, EstimatorSpec, NoiseModel, QuadrotorParams, WindField};
use nalgebra::{DMatrix, DVector};

fn main() -> armpc::Result<()> {
    let angle: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let wind = WindField {
        speed: 4.0,
        angle_deg: angle,
        drag: 0.5,
        length: 0.4,
    };
    let x0 = DVector::from_row_slice(&[-1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let plant = make_quadrotor(wind, vec![0.0, 22.5], QuadrotorParams::default(), NoiseModel::TruncatedGaussian { variance: 1e-5 }, x0);
    let spec = EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 1000,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    };
    for variant in [Variant::AdaptiveA, Variant::NaiveTube, Variant::Benchmark] {
        let mut rng = rng_for(0);
        let cfg = ControllerConfig {
            variant,
            horizon: 8,
            q: DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 1.0, 10.0, 0.1, 0.1, 0.1])),
            r: DMatrix::identity(2, 2),
            fixed_gain: true,
            f_clamp: None,
        };
        let mut ctrl = build_controller(&plant, cfg, &spec, &mut rng)?;
        let log = run_episode(&plant, &mut ctrl, &plant.x0, 60, 0, 0, &mut rng)?;
        let m = &log.metrics;
        match m.infeasible_step {
            Some(t) => println!("{:<11} infeasible at step {t}", variant.name()),
            None => println!(
                "{:<11} mean position error {:.3}, final position ({:.3}, {:.3}), violations {}",
                variant.name(),
                m.mean_position_error,
                log.final_state[0],
                log.final_state[1],
                m.state_violations + m.input_violations
            ),
        }
    }
    Ok(())
}

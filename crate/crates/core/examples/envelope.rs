//! Feasible envelopes of the certainty-equivalent controller and the
//! benchmark on the matched double integrator as the uncertainty grows.
//!
//! Run with `cargo run --release --example envelope`.

use armpc::controller::{ControllerConfig, Variant};
use armpc::simulation::{build_controller, feasible_envelope, make_double_integrator, rng_for, EstimatorSpec, NoiseModel};
use nalgebra::DMatrix;

fn main() -> armpc::Result<()> {
    let spec = EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 50,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    };
    println!("{:>6} {:>10} {:>10}", "w1", "CE", "benchmark");
    for i in 0..=6 {
        let w1 = 0.25 * i as f64;
        let plant = make_double_integrator(true, w1, 0.0, NoiseModel::TruncatedGaussian { variance: 5e-3 });
        let mut fractions = Vec::new();
        for variant in [Variant::AdaptiveA, Variant::Benchmark] {
            let cfg = ControllerConfig {
                variant,
                horizon: 3,
                q: DMatrix::identity(2, 2),
                r: DMatrix::identity(1, 1),
                fixed_gain: false,
                f_clamp: None,
            };
            let ctrl = build_controller(&plant, cfg, &spec, &mut rng_for(0))?;
            fractions.push(feasible_envelope(&ctrl, 21)?);
        }
        println!("{w1:6.2} {:10.3} {:10.3}", fractions[0], fractions[1]);
    }
    Ok(())
}

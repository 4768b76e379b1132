use armpc::controller::{ControllerConfig, Variant};
use armpc::estimation::Blr;
use armpc::simulation::{build_controller, make_double_integrator, rng_for, run_episode, run_episodes, EstimatorSpec, NoiseModel, Plant, RunLog};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn plant() -> Plant {
    make_double_integrator(true, 0.5, 0.0, NoiseModel::TruncatedGaussian { variance: 5e-3 })
}

fn run(variant: Variant, seed: u64, steps: usize) -> RunLog {
    let p = plant();
    let mut rng = rng_for(seed);
    let cfg = ControllerConfig {
        variant,
        horizon: 3,
        q: DMatrix::identity(2, 2),
        r: DMatrix::identity(1, 1),
        fixed_gain: false,
        f_clamp: None,
    };
    let spec = EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 45,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    };
    let mut ctrl = build_controller(&p, cfg, &spec, &mut rng).unwrap();
    run_episode(&p, &mut ctrl, &p.x0, steps, seed, 0, &mut rng).unwrap()
}

#[test]
fn same_seed_gives_identical_logs() {
    let a = run(Variant::AdaptiveA, 4, 30);
    let b = run(Variant::AdaptiveA, 4, 30);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), run(Variant::AdaptiveA, 5, 30).hash());
}

#[test]
fn zero_steps_logs_only_the_initial_state() {
    let log = run(Variant::AdaptiveA, 0, 0);
    assert!(log.records.is_empty());
    assert_eq!(log.final_state, vec![2.0, 2.0]);
    assert_eq!(log.metrics.cost, 0.0);
}

#[test]
fn fifty_step_run_is_finite_and_safe() {
    let log = run(Variant::AdaptiveA, 1, 50);
    assert!(log.metrics.cost.is_finite());
    assert_eq!(log.metrics.steps, 50);
    assert_eq!(log.metrics.state_violations + log.metrics.input_violations, 0);
    let csv = log.to_csv();
    assert!(csv.starts_with("# armpc-runlog v1\n"));
    assert_eq!(csv.lines().count(), 2 + 50 + 1);
}

#[test]
fn every_adaptive_variant_keeps_its_guarantees_across_episodes() {
    for variant in [Variant::AdaptiveA, Variant::AdaptiveB, Variant::AdaptiveC] {
        let p = plant();
        let mut rng = rng_for(9);
        let cfg = ControllerConfig {
            variant,
            horizon: 3,
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
            fixed_gain: false,
            f_clamp: None,
        };
        let spec = EstimatorSpec::Blr {
            delta: 0.05,
            warmup: 45,
            prior_eps: 1e-2,
            prior_precision: 1.0,
        };
        let mut ctrl = build_controller(&p, cfg, &spec, &mut rng).unwrap();
        let logs = run_episodes(&p, &mut ctrl, 3, 20, 9, &mut rng).unwrap();
        for log in &logs {
            let m = &log.metrics;
            assert!(m.infeasible_step.is_none(), "{variant:?}");
            assert_eq!(m.state_violations + m.input_violations + m.containment_violations + m.nesting_violations + m.terminal_nesting_violations, 0, "{variant:?}");
        }
    }
}

#[test]
fn noise_samples_stay_inside_the_declared_box() {
    let mut rng = rng_for(1);
    for noise in [NoiseModel::TruncatedGaussian { variance: 5e-3 }, NoiseModel::UniformBox { half_width: 0.3 }] {
        let v = noise.support(2);
        for _ in 0..500_000 {
            assert!(v.contains_point(&noise.sample(2, &mut rng)));
        }
    }
}

/// Batch and sequential posteriors disagree as soon as the data term of the
/// update has the wrong sign, so the equivalence check detects that error.
#[test]
fn batch_equivalence_detects_a_sign_error_in_the_update() {
    let mut rng = rng_for(2);
    let d = 3;
    let phis: Vec<DVector<f64>> = (0..40).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))).collect();
    let ys: Vec<DVector<f64>> = phis.iter().map(|p| DVector::from_element(1, 0.3 * p.sum())).collect();
    let batch = Blr::from_data(&phis, &ys, 1e-2, &[0.1], 0.05, 1).unwrap();
    let mut good = Blr::new(vec![DVector::zeros(d)], vec![DMatrix::identity(d, d) * 1e-2], &[0.1], 0.05, 1).unwrap();
    let mut bad = good.clone();
    for (p, y) in phis.iter().zip(&ys) {
        good.update(p, y).unwrap();
        bad.update(p, &(-y)).unwrap();
    }
    assert!((&batch.row(0).mean - &good.row(0).mean).amax() <= 1e-8);
    assert!((&batch.row(0).mean - &bad.row(0).mean).amax() > 1e-2);
}

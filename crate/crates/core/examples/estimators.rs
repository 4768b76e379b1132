//! Set membership and Bayesian regression on a scalar regression problem,
//! once with bounded noise and once with a small bias that breaks the
//! bounded-noise model.
//!
//! Run with `cargo run --release --example estimators`.

use armpc::simulation::{rng_for, toy_blr, toy_set_membership, ToyProblem};

fn main() -> armpc::Result<()> {
    for (label, problem) in [("well-specified", ToyProblem::default()), ("biased", ToyProblem::biased(0.05))] {
        let data = problem.dataset(100, &mut rng_for(0));
        let sm = toy_set_membership(&problem, &data)?;
        let blr = toy_blr(&problem, &data, 0.05)?;
        println!("{label}:");
        for t in [0, 5, 10, 25, 50, 100] {
            let sm_text = match sm.radii.get(t) {
                Some(r) => format!("radius {r:.4} estimate {:.3?}", sm.estimates[t]),
                None => "feasible set empty".into(),
            };
            println!(
                "  t = {t:3}: set membership {sm_text}; regression radius {:.4} estimate {:.3?} covered {}",
                blr.radii[t], blr.estimates[t], blr.covered[t]
            );
        }
        if let Some(c) = sm.collapse {
            println!("  set membership emptied after {c} samples");
        }
    }
    Ok(())
}

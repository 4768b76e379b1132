//! Runs a bundled JSON config through the same code path as `armpc run`
//! and prints the campaign summary.
//!
//! Run with `cargo run --release --example campaign [config] [out dir]`.

use std::path::PathBuf;

use armpc::cli::{self, Summary};
use armpc::config::Config;

fn main() -> armpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/double_integrator_matched.json"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("armpc_campaign"));
    let cfg = Config::load(&config)?;
    match cli::run(&cfg, &out, None)? {
        Summary::Control(rows) => {
            for r in rows {
                println!(
                    "{:<11} feasible {}/{} mean cost {:.3} violations {} guarantee failures {}",
                    r.controller,
                    r.feasible_runs,
                    r.runs,
                    r.cost_mean,
                    r.state_violations + r.input_violations,
                    r.invariant_failures
                );
            }
        }
        Summary::Toy(rows) => {
            for r in rows {
                println!("{:<15} collapses {}/{} covered {}", r.estimator, r.collapses, r.runs, r.covered_runs);
            }
        }
    }
    println!("logs and summary in {}", out.display());
    Ok(())
}

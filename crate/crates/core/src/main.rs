use std::path::PathBuf;
use std::process::ExitCode;

use armpc::cli::{self, Suite, OUT_DIR_ENV};
use armpc::config::Config;
use clap::{Parser, Subcommand};

/// Exit status when a run breaks a closed-loop guarantee.
const INVARIANT_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "armpc", version, about = "Adaptive robust MPC experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        /// First seed; overrides `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Repeat the experiment over the values of one config field.
    Sweep {
        config: PathBuf,
        /// Dotted field path such as `plant.w1`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a self-check suite: geometry, estimators, mpc or closed_loop.
    Verify { suite: Suite },
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn failures_to_exit(failures: usize) -> ExitCode {
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} run(s) broke a closed-loop guarantee");
        ExitCode::from(INVARIANT_FAILURE)
    }
}

fn run(args: Args) -> armpc::Result<ExitCode> {
    match args.command {
        Command::Run { config, out, seed, jobs } => {
            let mut cfg = Config::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let summary = cli::run(&cfg, &out, jobs)?;
            println!("wrote {}", out.join("summary.csv").display());
            Ok(failures_to_exit(summary.invariant_failures()))
        }
        Command::Sweep { config, param, values, out, jobs } => {
            let cfg = Config::load(&config)?;
            let values = cli::parse_values(&values);
            let failures = cli::sweep(&cfg, &param, &values, &out, jobs)?;
            if !values.is_empty() {
                println!("wrote {}", out.join("sweep.csv").display());
            }
            Ok(failures_to_exit(failures))
        }
        Command::Verify { suite } => {
            let checks = cli::verify(suite)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {:<60} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Version tag written in the first line of every run CSV.
pub const RUNLOG_SCHEMA: &str = "armpc-runlog v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub u0: Vec<f64>,
    pub f_hat: Vec<f64>,
    /// Realized compound disturbance `x⁺ − Ax − Bu0`.
    pub d: Vec<f64>,
    pub status: String,
    pub objective: f64,
    pub budget_id: String,
    pub d_contained: bool,
    /// Whether the true parameters lie in every published confidence set.
    pub covered: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub cost: f64,
    pub state_violations: usize,
    pub input_violations: usize,
    pub infeasible_step: Option<usize>,
    /// True when the true parameters stayed in every confidence set.
    pub confidence_event: Option<bool>,
    pub nesting_violations: usize,
    pub terminal_nesting_violations: usize,
    pub containment_violations: usize,
    pub max_kkt_residual: f64,
    /// Mean `‖x‖` over the last 50 states.
    pub tail_mean_norm: f64,
    /// Mean position error norm over the run, for planar plants.
    pub mean_position_error: f64,
    /// Noise-free `Σ (Δv/dt)²` for the cruise plant.
    pub squared_acceleration: f64,
    pub estimator_failure_step: Option<usize>,
    pub fallback_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub run_id: String,
    pub seed: u64,
    pub plant: String,
    pub variant: String,
    pub episode: usize,
    pub records: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub metrics: RunMetrics,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(";")
}

impl RunLog {
    /// One row per step; vectors are `;`-separated inside a column.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {RUNLOG_SCHEMA}");
        let _ = writeln!(s, "t,x,u,u0,f_hat,d,status,objective,budget_id,d_contained,covered");
        for r in &self.records {
            let covered = r.covered.map_or(String::new(), |c| c.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.17e},{},{},{}",
                r.t,
                join(&r.x),
                join(&r.u),
                join(&r.u0),
                join(&r.f_hat),
                join(&r.d),
                r.status,
                r.objective,
                r.budget_id,
                r.d_contained,
                covered
            );
        }
        let _ = writeln!(s, "final,{},,,,,,,,,", join(&self.final_state));
        s
    }

    /// SHA-256 of the CSV rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }

    /// Writes `<run_id>.csv` and `<run_id>.json` into `dir`.
    pub fn write(&self, dir: &Path, config: &serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", self.run_id)), self.to_csv())?;
        let side = serde_json::json!({
            "run_id": self.run_id,
            "seed": self.seed,
            "plant": self.plant,
            "variant": self.variant,
            "episode": self.episode,
            "hash": self.hash(),
            "metrics": self.metrics,
            "config": config,
        });
        std::fs::write(dir.join(format!("{}.json", self.run_id)), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }
}

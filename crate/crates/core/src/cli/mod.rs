//! The `run`, `sweep` and `verify` commands behind the binary, usable from
//! library code.

mod verify;

use std::path::Path;

use serde::Serialize;

use crate::config::Config;
use crate::controller::Variant;
use crate::error::{Error, Result};
use crate::simulation::{build_controller, feasible_envelope, rng_for, run_campaign, run_episodes, toy_blr, toy_set_membership, RunLog};

pub use verify::{verify, Check, Suite};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "ARMPC_OUT_DIR";

/// Version line written as a comment at the top of `summary.csv`.
pub const SUMMARY_SCHEMA: &str = "armpc-summary v1";
/// Version line written as a comment at the top of `sweep.csv`.
pub const SWEEP_SCHEMA: &str = "armpc-sweep v1";

/// Collapse deadline used in the toy summary, in samples.
pub const COLLAPSE_WINDOW: usize = 25;

/// All episodes of one controller on one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub logs: Vec<RunLog>,
    /// Feasible-envelope fraction at `t = 0` when requested.
    pub envelope: Option<f64>,
}

/// Campaign statistics of one controller.
#[derive(Debug, Clone, Serialize)]
pub struct ControllerSummary {
    pub controller: String,
    pub runs: usize,
    /// Runs with every episode solved to the end.
    pub feasible_runs: usize,
    pub infeasible_at_start: usize,
    pub cost_mean: f64,
    pub cost_q10: f64,
    pub cost_q50: f64,
    pub cost_q90: f64,
    pub state_violations: usize,
    pub input_violations: usize,
    pub containment_violations: usize,
    pub nesting_violations: usize,
    pub terminal_nesting_violations: usize,
    pub confidence_events: usize,
    pub fallback_steps: usize,
    pub tail_mean_norm: f64,
    pub mean_position_error: f64,
    pub squared_acceleration: f64,
    pub envelope: f64,
    pub max_kkt_residual: f64,
    /// Runs breaking a guarantee that should hold under the confidence
    /// event.
    pub invariant_failures: usize,
}

/// Statistics of one estimator on the toy regression problem.
#[derive(Debug, Clone, Serialize)]
pub struct ToySummary {
    pub estimator: String,
    pub runs: usize,
    pub collapses: usize,
    pub collapses_within_window: usize,
    pub median_collapse: f64,
    pub covered_runs: usize,
    pub mean_final_radius: f64,
    pub invariant_failures: usize,
}

#[derive(Debug, Clone)]
pub enum Summary {
    Control(Vec<ControllerSummary>),
    Toy(Vec<ToySummary>),
}

impl Summary {
    pub fn invariant_failures(&self) -> usize {
        match self {
            Summary::Control(rows) => rows.iter().map(|r| r.invariant_failures).sum(),
            Summary::Toy(rows) => rows.iter().map(|r| r.invariant_failures).sum(),
        }
    }

    fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = match self {
            Summary::Control(rows) => serde_json::to_string_pretty(rows)?,
            Summary::Toy(rows) => serde_json::to_string_pretty(rows)?,
        };
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        let mut w = csv::Writer::from_writer(versioned_file(&dir.join(format!("{stem}.csv")), SUMMARY_SCHEMA)?);
        match self {
            Summary::Control(rows) => rows.iter().try_for_each(|r| w.serialize(r)),
            Summary::Toy(rows) => rows.iter().try_for_each(|r| w.serialize(r)),
        }
        .map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }
}

/// Creates `path` holding the comment line `# schema`.
fn versioned_file(path: &Path, schema: &str) -> Result<std::fs::File> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# {schema}")?;
    Ok(f)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// True when the run breaks a guarantee the controller should keep while
/// the confidence event holds: constraint satisfaction, containment of the
/// realized disturbance, nesting of the published sets, and recursive
/// feasibility after a feasible start.
fn breaks_invariant(variant: Variant, log: &RunLog) -> bool {
    let m = &log.metrics;
    if variant == Variant::NaiveTube || m.confidence_event == Some(false) {
        return false;
    }
    m.state_violations + m.input_violations + m.containment_violations + m.nesting_violations + m.terminal_nesting_violations > 0 || matches!(m.infeasible_step, Some(t) if t > 0)
}

/// Runs every configured controller on every seed.
pub fn run_controllers(cfg: &Config, jobs: Option<usize>) -> Result<Vec<(Variant, Vec<SeedOutcome>)>> {
    let plant = cfg.plant.build()?;
    let seeds = cfg.experiment.seed_list();
    let exp = &cfg.experiment;
    cfg.controller
        .variants
        .iter()
        .map(|&variant| {
            let ccfg = cfg.controller.build(variant, plant.state_dim(), plant.input_dim())?;
            let outcomes = run_campaign(&seeds, jobs, |seed| {
                let mut rng = rng_for(seed);
                let mut ctrl = build_controller(&plant, ccfg.clone(), &cfg.estimator, &mut rng)?;
                let envelope = exp.envelope_grid.map(|g| feasible_envelope(&ctrl, g)).transpose()?;
                let logs = run_episodes(&plant, &mut ctrl, exp.episodes, exp.steps, seed, &mut rng)?;
                Ok(SeedOutcome { seed, logs, envelope })
            })?;
            Ok((variant, outcomes))
        })
        .collect()
}

pub fn summarize(variant: Variant, outcomes: &[SeedOutcome]) -> ControllerSummary {
    let all: Vec<&RunLog> = outcomes.iter().flat_map(|o| o.logs.iter()).collect();
    let feasible: Vec<&SeedOutcome> = outcomes.iter().filter(|o| o.logs.iter().all(|l| l.metrics.infeasible_step.is_none())).collect();
    let mut costs: Vec<f64> = feasible.iter().map(|o| o.logs.iter().map(|l| l.metrics.cost).sum()).collect();
    costs.sort_by(f64::total_cmp);
    let sum = |f: fn(&RunLog) -> usize| all.iter().map(|l| f(l)).sum::<usize>();
    ControllerSummary {
        controller: variant.name().into(),
        runs: outcomes.len(),
        feasible_runs: feasible.len(),
        infeasible_at_start: outcomes.iter().filter(|o| o.logs.first().is_some_and(|l| l.metrics.infeasible_step == Some(0))).count(),
        cost_mean: mean(costs.iter().copied()),
        cost_q10: quantile(&costs, 0.1),
        cost_q50: quantile(&costs, 0.5),
        cost_q90: quantile(&costs, 0.9),
        state_violations: sum(|l| l.metrics.state_violations),
        input_violations: sum(|l| l.metrics.input_violations),
        containment_violations: sum(|l| l.metrics.containment_violations),
        nesting_violations: sum(|l| l.metrics.nesting_violations),
        terminal_nesting_violations: sum(|l| l.metrics.terminal_nesting_violations),
        confidence_events: all.iter().filter(|l| l.metrics.confidence_event == Some(true)).count(),
        fallback_steps: sum(|l| l.metrics.fallback_steps),
        tail_mean_norm: mean(feasible.iter().flat_map(|o| o.logs.iter()).map(|l| l.metrics.tail_mean_norm)),
        mean_position_error: mean(feasible.iter().flat_map(|o| o.logs.iter()).map(|l| l.metrics.mean_position_error)),
        squared_acceleration: mean(feasible.iter().flat_map(|o| o.logs.iter()).map(|l| l.metrics.squared_acceleration)),
        envelope: mean(outcomes.iter().filter_map(|o| o.envelope)),
        max_kkt_residual: all.iter().map(|l| l.metrics.max_kkt_residual).fold(0.0, f64::max),
        invariant_failures: all.iter().filter(|l| breaks_invariant(variant, l)).count(),
    }
}

/// Runs both estimators on the toy problem for every seed.
pub fn run_toy(cfg: &Config, jobs: Option<usize>) -> Result<Vec<ToySummary>> {
    let toy = cfg.plant.toy().ok_or_else(|| Error::config("plant.kind", "expected the toy problem"))?;
    let delta = match cfg.estimator {
        crate::simulation::EstimatorSpec::Blr { delta, .. } => delta,
        _ => 0.05,
    };
    let seeds = cfg.experiment.seed_list();
    let steps = cfg.experiment.steps;
    let traces = run_campaign(&seeds, jobs, |seed| {
        let data = toy.dataset(steps, &mut rng_for(seed));
        Ok((toy_set_membership(&toy, &data)?, toy_blr(&toy, &data, delta)?))
    })?;
    let well_specified = toy.bias == 0.0;
    let mut collapses: Vec<f64> = traces.iter().filter_map(|(sm, _)| sm.collapse.map(|c| c as f64)).collect();
    collapses.sort_by(f64::total_cmp);
    let sm = ToySummary {
        estimator: "set_membership".into(),
        runs: traces.len(),
        collapses: collapses.len(),
        collapses_within_window: collapses.iter().filter(|&&c| c <= COLLAPSE_WINDOW as f64).count(),
        median_collapse: quantile(&collapses, 0.5),
        covered_runs: traces.iter().filter(|(sm, _)| sm.collapse.is_none()).count(),
        mean_final_radius: mean(traces.iter().filter(|(sm, _)| sm.collapse.is_none()).map(|(sm, _)| *sm.radii.last().expect("initial radius"))),
        invariant_failures: if well_specified { collapses.len() } else { 0 },
    };
    let blr = ToySummary {
        estimator: "blr".into(),
        runs: traces.len(),
        collapses: 0,
        collapses_within_window: 0,
        median_collapse: f64::NAN,
        covered_runs: traces.iter().filter(|(_, b)| b.covered_throughout()).count(),
        mean_final_radius: mean(traces.iter().map(|(_, b)| *b.radii.last().expect("prior radius"))),
        invariant_failures: 0,
    };
    Ok(vec![sm, blr])
}

/// Runs the experiment of `cfg` and returns its summary.
pub fn execute(cfg: &Config, jobs: Option<usize>) -> Result<(Summary, Vec<RunLog>)> {
    if cfg.plant.is_toy() {
        return Ok((Summary::Toy(run_toy(cfg, jobs)?), Vec::new()));
    }
    let results = run_controllers(cfg, jobs)?;
    let rows = results.iter().map(|(v, o)| summarize(*v, o)).collect();
    let logs = results.into_iter().flat_map(|(_, o)| o.into_iter().flat_map(|s| s.logs)).collect();
    Ok((Summary::Control(rows), logs))
}

/// `run`: executes the experiment and writes the resolved config, the run
/// logs and the summary into `out`.
pub fn run(cfg: &Config, out: &Path, jobs: Option<usize>) -> Result<Summary> {
    std::fs::create_dir_all(out)?;
    let value = cfg.to_value();
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&value)?)?;
    let (summary, logs) = execute(cfg, jobs)?;
    if cfg.experiment.write_runs {
        for log in &logs {
            log.write(&out.join("runs"), &value)?;
        }
    }
    summary.write(out, "summary")?;
    Ok(summary)
}

/// Parses one sweep value: JSON when it parses, a string otherwise.
pub fn parse_value(text: &str) -> serde_json::Value {
    serde_json::from_str(text.trim()).unwrap_or_else(|_| serde_json::Value::String(text.trim().to_string()))
}

/// Splits a comma-separated value list. Empty entries are dropped, so an
/// empty list yields no values.
pub fn parse_values(list: &str) -> Vec<serde_json::Value> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(parse_value).collect()
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow<T: Serialize> {
    param: String,
    value: String,
    #[serde(flatten)]
    row: T,
}

/// `sweep`: runs the experiment once per value of `param` and writes one
/// tidy `sweep.csv` with a row per value and controller. Returns the total
/// number of invariant failures. Every override is validated before the
/// first run.
pub fn sweep(cfg: &Config, param: &str, values: &[serde_json::Value], out: &Path, jobs: Option<usize>) -> Result<usize> {
    if values.is_empty() {
        return Ok(0);
    }
    let cfgs = values.iter().map(|v| cfg.with_override(param, v.clone())).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(versioned_file(&out.join("sweep.csv"), SWEEP_SCHEMA)?);
    let mut json_rows = Vec::new();
    let mut failures = 0;
    let mut header_written = false;
    for (value, c) in values.iter().zip(&cfgs) {
        let (summary, _) = execute(c, jobs)?;
        failures += summary.invariant_failures();
        let label = match value {
            serde_json::Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let rows: Vec<serde_json::Value> = match &summary {
            Summary::Control(rows) => rows.iter().map(|r| serde_json::to_value(SweepRow { param: param.into(), value: label.clone(), row: r.clone() })).collect::<std::result::Result<_, _>>()?,
            Summary::Toy(rows) => rows.iter().map(|r| serde_json::to_value(SweepRow { param: param.into(), value: label.clone(), row: r.clone() })).collect::<std::result::Result<_, _>>()?,
        };
        for row in &rows {
            let obj = row.as_object().expect("rows serialize to objects");
            if !header_written {
                w.write_record(obj.keys()).map_err(csv_err)?;
                header_written = true;
            }
            w.write_record(obj.values().map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => "NaN".into(),
                v => v.to_string(),
            }))
            .map_err(csv_err)?;
        }
        json_rows.extend(rows);
    }
    w.flush()?;
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&json_rows)?)?;
    Ok(failures)
}

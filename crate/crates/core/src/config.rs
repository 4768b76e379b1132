//! JSON experiment configuration with sections `plant`, `controller`,
//! `estimator` and `experiment`. Every field has a default so a config only
//! needs to name what it changes; validation errors carry the field path.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, Variant};
use crate::error::{Error, Result};
use crate::simulation::{make_cruise, make_double_integrator, make_quadrotor, CruiseParams, EstimatorSpec, NoiseModel, Plant, QuadrotorParams, ToyProblem, WindField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

fn default_estimator() -> EstimatorSpec {
    EstimatorSpec::Blr {
        delta: 0.05,
        warmup: 45,
        prior_eps: 1e-2,
        prior_precision: 1.0,
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            plant: PlantConfig::default(),
            controller: ControllerSection::default(),
            estimator: default_estimator(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// A matrix given as a scalar multiple of the identity, a diagonal, or in
/// full as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, n: usize, path: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(s) => Ok(DMatrix::identity(n, n) * *s),
            MatrixSpec::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::config(path, format!("diagonal has {} entries, expected {n}", d.len())));
                }
                Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
            }
            MatrixSpec::Full(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::config(path, format!("expected a {n}x{n} matrix")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    DoubleIntegrator {
        #[serde(default = "yes")]
        matched: bool,
        #[serde(default = "default_w1")]
        w1: f64,
        #[serde(default)]
        w2: f64,
        #[serde(default = "default_di_noise")]
        noise: NoiseModel,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    Quadrotor {
        #[serde(default = "default_wind_speed")]
        wind_speed: f64,
        #[serde(default)]
        wind_angle_deg: f64,
        #[serde(default = "default_drag")]
        drag: f64,
        #[serde(default = "default_length")]
        length: f64,
        /// Directions of the ridge features in degrees.
        #[serde(default = "default_bank")]
        bank_deg: Vec<f64>,
        #[serde(default = "default_quad_noise")]
        noise: NoiseModel,
        #[serde(default = "default_quad_x0")]
        x0: Vec<f64>,
    },
    Cruise {
        #[serde(default = "default_cruise_noise")]
        noise: NoiseModel,
        /// `[start, end, grade in degrees]` per road segment.
        #[serde(default = "default_segments")]
        segments: Vec<[f64; 3]>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    /// The scalar regression problem used to study the estimators alone.
    Toy {
        #[serde(default = "default_toy_w")]
        w: Vec<f64>,
        #[serde(default = "default_toy_noise")]
        noise_half_width: f64,
        #[serde(default)]
        bias: f64,
    },
}

fn yes() -> bool {
    true
}
fn default_w1() -> f64 {
    0.5
}
fn default_di_noise() -> NoiseModel {
    NoiseModel::TruncatedGaussian { variance: 5e-3 }
}
fn default_wind_speed() -> f64 {
    4.0
}
fn default_drag() -> f64 {
    0.5
}
fn default_length() -> f64 {
    0.4
}
fn default_bank() -> Vec<f64> {
    vec![0.0, 22.5]
}
fn default_quad_noise() -> NoiseModel {
    NoiseModel::TruncatedGaussian { variance: 1e-5 }
}
fn default_quad_x0() -> Vec<f64> {
    vec![-1.0, 1.0, 0.0, 0.0, 0.0, 0.0]
}
fn default_cruise_noise() -> NoiseModel {
    NoiseModel::TruncatedGaussian { variance: 1e-3 }
}
fn default_segments() -> Vec<[f64; 3]> {
    CruiseParams::default().segments.iter().map(|s| [s.0, s.1, s.2]).collect()
}
fn default_toy_w() -> Vec<f64> {
    ToyProblem::default().w
}
fn default_toy_noise() -> f64 {
    ToyProblem::default().noise_half_width
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::DoubleIntegrator {
            matched: true,
            w1: default_w1(),
            w2: 0.0,
            noise: default_di_noise(),
            x0: None,
        }
    }
}

impl PlantConfig {
    pub fn is_toy(&self) -> bool {
        matches!(self, PlantConfig::Toy { .. })
    }

    pub fn toy(&self) -> Option<ToyProblem> {
        match self {
            PlantConfig::Toy { w, noise_half_width, bias } => Some(ToyProblem {
                w: w.clone(),
                noise_half_width: *noise_half_width,
                bias: *bias,
            }),
            _ => None,
        }
    }

    /// Builds the ground-truth plant. Fails for the toy problem, which has
    /// no dynamics.
    pub fn build(&self) -> Result<Plant> {
        let plant = match self {
            PlantConfig::DoubleIntegrator { matched, w1, w2, noise, x0 } => {
                let mut p = make_double_integrator(*matched, *w1, *w2, *noise);
                if let Some(x0) = x0 {
                    p.x0 = vec_of(x0, 2, "plant.x0")?;
                }
                p
            }
            PlantConfig::Quadrotor {
                wind_speed,
                wind_angle_deg,
                drag,
                length,
                bank_deg,
                noise,
                x0,
            } => {
                if bank_deg.is_empty() {
                    return Err(Error::config("plant.bank_deg", "needs at least one direction"));
                }
                let wind = WindField {
                    speed: *wind_speed,
                    angle_deg: *wind_angle_deg,
                    drag: *drag,
                    length: *length,
                };
                make_quadrotor(wind, bank_deg.clone(), QuadrotorParams::default(), *noise, vec_of(x0, 6, "plant.x0")?)
            }
            PlantConfig::Cruise { noise, segments, x0 } => {
                if segments.is_empty() {
                    return Err(Error::config("plant.segments", "needs at least one segment"));
                }
                if let Some(i) = segments.iter().position(|s| !(s[1] > s[0])) {
                    return Err(Error::config(format!("plant.segments[{i}]"), "end must exceed start"));
                }
                let params = CruiseParams {
                    segments: segments.iter().map(|s| (s[0], s[1], s[2])).collect(),
                    ..CruiseParams::default()
                };
                let mut p = make_cruise(&params, *noise);
                if let Some(x0) = x0 {
                    p.x0 = vec_of(x0, 1, "plant.x0")?;
                }
                p
            }
            PlantConfig::Toy { .. } => return Err(Error::config("plant.kind", "the toy problem has no dynamics")),
        };
        plant.noise.validate()?;
        if plant.x.max_violation(&plant.x0) > 0.0 {
            return Err(Error::config("plant.x0", "lies outside the state constraints"));
        }
        Ok(plant)
    }
}

fn vec_of(v: &[f64], n: usize, path: &str) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::config(path, format!("has {} entries, expected {n}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(path, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    /// Controllers run side by side on identical seeds.
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "unit")]
    pub q: MatrixSpec,
    #[serde(default = "unit")]
    pub r: MatrixSpec,
    #[serde(default)]
    pub fixed_gain: bool,
    /// A-priori per-row bound on the magnitude of the uncertain term.
    #[serde(default)]
    pub f_clamp: Option<Vec<f64>>,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::AdaptiveA, Variant::Benchmark]
}
fn default_horizon() -> usize {
    3
}
fn unit() -> MatrixSpec {
    MatrixSpec::Scalar(1.0)
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            variants: default_variants(),
            horizon: default_horizon(),
            q: unit(),
            r: unit(),
            fixed_gain: false,
            f_clamp: None,
        }
    }
}

impl ControllerSection {
    /// The controller configuration of `variant` for a plant with `n`
    /// states and `m` inputs.
    pub fn build(&self, variant: Variant, n: usize, m: usize) -> Result<ControllerConfig> {
        if self.horizon == 0 {
            return Err(Error::config("controller.horizon", "must be at least 1"));
        }
        let q = self.q.to_matrix(n, "controller.q")?;
        let r = self.r.to_matrix(m, "controller.r")?;
        check_symmetric(&q, "controller.q")?;
        check_symmetric(&r, "controller.r")?;
        if q.symmetric_eigenvalues().min() < -1e-12 {
            return Err(Error::config("controller.q", "must be positive semidefinite"));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::config("controller.r", "must be positive definite"));
        }
        let f_clamp = match &self.f_clamp {
            Some(c) => {
                let v = vec_of(c, n, "controller.f_clamp")?;
                if v.iter().any(|&x| x < 0.0) {
                    return Err(Error::config("controller.f_clamp", "entries must be nonnegative"));
                }
                Some(v)
            }
            None => None,
        };
        Ok(ControllerConfig {
            variant,
            horizon: self.horizon,
            q,
            r,
            fixed_gain: self.fixed_gain,
            f_clamp,
        })
    }
}

fn check_symmetric(m: &DMatrix<f64>, path: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) || (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::config(path, "must be finite and symmetric"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Number of seeds; seed `i` is `seed + i`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "one")]
    pub episodes: usize,
    /// Grid resolution of the feasible-envelope metric; off when absent.
    #[serde(default)]
    pub envelope_grid: Option<usize>,
    /// Write one CSV and one JSON log per run.
    #[serde(default = "yes")]
    pub write_runs: bool,
}

fn default_seeds() -> usize {
    10
}
fn default_steps() -> usize {
    50
}
fn one() -> usize {
    1
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seeds: default_seeds(),
            seed: 0,
            steps: default_steps(),
            episodes: 1,
            envelope_grid: None,
            write_runs: true,
        }
    }
}

impl ExperimentSection {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed + i).collect()
    }
}

impl Config {
    /// Parses and validates a config from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    /// Parses and validates a config from a JSON value.
    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: Config = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        let e = &self.experiment;
        if e.seeds == 0 {
            return Err(Error::config("experiment.seeds", "must be at least 1"));
        }
        if e.episodes == 0 {
            return Err(Error::config("experiment.episodes", "must be at least 1"));
        }
        if matches!(e.envelope_grid, Some(g) if g < 2) {
            return Err(Error::config("experiment.envelope_grid", "must be at least 2"));
        }
        if let Some(toy) = self.plant.toy() {
            return toy.validate().map_err(|err| match err {
                Error::Config { path, msg } => Error::config(path.replacen("toy", "plant", 1), msg),
                other => other,
            });
        }
        if self.controller.variants.is_empty() {
            return Err(Error::config("controller.variants", "needs at least one controller"));
        }
        let plant = self.plant.build()?;
        if e.envelope_grid.is_some() && plant.state_dim() != 2 {
            return Err(Error::config("experiment.envelope_grid", "the envelope is defined for two-state plants only"));
        }
        if matches!(self.estimator, EstimatorSpec::SetMembership { .. }) && plant.noise == NoiseModel::Zero {
            return Err(Error::config("estimator.kind", "set membership needs a nonzero noise bound"));
        }
        for &v in &self.controller.variants {
            self.controller.build(v, plant.state_dim(), plant.input_dim())?;
        }
        Ok(())
    }

    /// Returns a copy with the dotted `path` set to `value`. The path must
    /// name an existing field (or an optional one inside an existing
    /// section), and the result is validated.
    pub fn with_override(&self, path: &str, value: serde_json::Value) -> Result<Self> {
        let mut root = self.to_value();
        let mut node = &mut root;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| Error::config(path, "does not name a config field"))?;
            if i + 1 == parts.len() {
                if !obj.contains_key(*part) {
                    return Err(Error::config(path, "does not name a config field"));
                }
                obj.insert((*part).to_string(), value);
                break;
            }
            node = obj.get_mut(*part).ok_or_else(|| Error::config(path, "does not name a config field"))?;
        }
        Self::from_value(root)
    }
}

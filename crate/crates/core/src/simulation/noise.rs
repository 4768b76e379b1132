use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Hyperbox;

/// Truncation point of the Gaussian noise in standard deviations.
pub const TRUNCATION: f64 = 1.96;

/// Additive process noise with a known bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent `N(0, variance)` components rejected outside `±1.96σ`.
    TruncatedGaussian { variance: f64 },
    /// Independent `U[−half_width, half_width]` components.
    UniformBox { half_width: f64 },
    Zero,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::TruncatedGaussian { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::config("plant.noise.variance", "must be positive"))
            }
            NoiseModel::UniformBox { half_width } if !(half_width > 0.0 && half_width.is_finite()) => {
                Err(Error::config("plant.noise.half_width", "must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Per-component bound `σ_i` with `|v_i| ≤ σ_i`.
    pub fn bound(&self) -> f64 {
        match *self {
            NoiseModel::TruncatedGaussian { variance } => TRUNCATION * variance.sqrt(),
            NoiseModel::UniformBox { half_width } => half_width,
            NoiseModel::Zero => 0.0,
        }
    }

    /// Sub-Gaussian scale: every component satisfies
    /// `E[exp(λv)] ≤ exp(λ²s²/2)`. A Gaussian truncated symmetrically keeps
    /// the scale of the untruncated one; a uniform box has scale equal to
    /// its half-width.
    pub fn sub_gaussian_scale(&self) -> f64 {
        match *self {
            NoiseModel::TruncatedGaussian { variance } => variance.sqrt(),
            NoiseModel::UniformBox { half_width } => half_width,
            NoiseModel::Zero => 0.0,
        }
    }

    /// The box `V` every sample lies in.
    pub fn support(&self, n: usize) -> Hyperbox {
        Hyperbox::symmetric(DVector::from_element(n, self.bound())).expect("bound is nonnegative")
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        match *self {
            NoiseModel::TruncatedGaussian { variance } => {
                let sd = variance.sqrt();
                let normal = Normal::new(0.0, sd).expect("positive standard deviation");
                DVector::from_fn(n, |_, _| loop {
                    let s: f64 = normal.sample(rng);
                    if s.abs() <= TRUNCATION * sd {
                        break s;
                    }
                })
            }
            NoiseModel::UniformBox { half_width } => DVector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width)),
            NoiseModel::Zero => DVector::zeros(n),
        }
    }
}

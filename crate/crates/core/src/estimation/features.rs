use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature map `φ` with `‖φ‖₂ ≤ 1` by construction: every analytic basis is
/// built from unit-bounded components scaled by `1/√d`, and loaded networks
/// end in a sigmoid layer scaled the same way.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// `φ(x) = tanh(x[index])` (d = 1).
    Tanh { index: usize },
    /// `φ(x) = (1/√2)[sin(4x₀), tanh(x₁)]`.
    SinTanh,
    /// Ridge bank over a planar position `(x[px], x[py])`:
    /// `φ_k = exp(−(p_y cos θ_k − p_x sin θ_k)²)/√d`.
    Ridge { px: usize, py: usize, angles_deg: Vec<f64> },
    /// Road-segment bank over an exogenous position `z[0]`:
    /// `φ_k = (tanh(p − a_k) + tanh(b_k − p))/(2√K)`.
    RoadSegments { segments: Vec<(f64, f64)> },
    /// Feedforward network loaded from JSON.
    Network(LoadedNetwork),
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Tanh { .. } => 1,
            FeatureMap::SinTanh => 2,
            FeatureMap::Ridge { angles_deg, .. } => angles_deg.len(),
            FeatureMap::RoadSegments { segments } => segments.len(),
            FeatureMap::Network(net) => net.output_dim(),
        }
    }

    /// Evaluates `φ(x, z)`; `z` is the exogenous signal for maps that use one.
    pub fn eval(&self, x: &DVector<f64>, z: Option<&DVector<f64>>) -> DVector<f64> {
        match self {
            FeatureMap::Tanh { index } => DVector::from_element(1, x[*index].tanh()),
            FeatureMap::SinTanh => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                DVector::from_vec(vec![s * (4.0 * x[0]).sin(), s * x[1].tanh()])
            }
            FeatureMap::Ridge { px, py, angles_deg } => {
                let scale = 1.0 / (angles_deg.len() as f64).sqrt();
                DVector::from_iterator(
                    angles_deg.len(),
                    angles_deg.iter().map(|a| {
                        let th = a.to_radians();
                        let s = x[*py] * th.cos() - x[*px] * th.sin();
                        scale * (-s * s).exp()
                    }),
                )
            }
            FeatureMap::RoadSegments { segments } => {
                let p = z.map_or(0.0, |z| z[0]);
                let scale = 1.0 / (2.0 * (segments.len() as f64).sqrt());
                DVector::from_iterator(segments.len(), segments.iter().map(|(a, b)| scale * ((p - a).tanh() + (b - p).tanh())))
            }
            FeatureMap::Network(net) => net.eval(x, z),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureMap::Ridge { angles_deg, .. } if angles_deg.is_empty() => Err(Error::config("feature_map.angles_deg", "need at least one angle")),
            FeatureMap::RoadSegments { segments } if segments.is_empty() => Err(Error::config("feature_map.segments", "need at least one segment")),
            FeatureMap::RoadSegments { segments } if segments.iter().any(|(a, b)| a >= b) => {
                Err(Error::config("feature_map.segments", "segment start must precede its end"))
            }
            FeatureMap::Network(net) => net.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `out × in` weight matrix.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// A feedforward network with ReLU hidden layers and a sigmoid output
/// layer whose outputs are scaled by `1/√d`. The input is the state,
/// optionally followed by the exogenous signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadedNetwork {
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub use_exogenous: bool,
}

impl LoadedNetwork {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let net: LoadedNetwork = serde_json::from_str(&text)?;
        net.validate()?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().and_then(|l| l.weights.first()).map_or(0, |r| r.len())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::config("feature_map.layers", "network has no layers"));
        };
        if last.activation != Activation::Sigmoid {
            return Err(Error::config("feature_map.layers[-1].activation", "output layer must be sigmoid"));
        }
        let mut width = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            if i + 1 < self.layers.len() && layer.activation != Activation::Relu {
                return Err(Error::config(format!("feature_map.layers[{i}].activation"), "hidden layers must be relu"));
            }
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::config(format!("feature_map.layers[{i}]"), "bias length must equal weight rows"));
            }
            if layer.weights.iter().any(|r| r.len() != width) {
                return Err(Error::config(format!("feature_map.layers[{i}].weights"), format!("expected {width} columns")));
            }
            if layer.weights.iter().flatten().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::config(format!("feature_map.layers[{i}]"), "non-finite weight"));
            }
            width = layer.bias.len();
        }
        Ok(())
    }

    pub fn eval(&self, x: &DVector<f64>, z: Option<&DVector<f64>>) -> DVector<f64> {
        let mut h: DVector<f64> = match (self.use_exogenous, z) {
            (true, Some(z)) => DVector::from_iterator(x.len() + z.len(), x.iter().chain(z.iter()).copied()),
            _ => x.clone(),
        };
        for layer in &self.layers {
            let rows = layer.weights.len();
            let w = DMatrix::from_fn(rows, h.len(), |i, j| layer.weights[i][j]);
            let mut out = w * &h + DVector::from_column_slice(&layer.bias);
            match layer.activation {
                Activation::Relu => out.apply(|v| *v = v.max(0.0)),
                Activation::Sigmoid => out.apply(|v| *v = 1.0 / (1.0 + (-*v).exp())),
            }
            h = out;
        }
        let scale = 1.0 / (h.len() as f64).sqrt();
        h * scale
    }
}

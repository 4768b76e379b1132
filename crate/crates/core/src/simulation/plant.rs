use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::noise::NoiseModel;
use crate::error::{Error, Result};
use crate::estimation::FeatureMap;
use crate::geometry::{Hyperbox, Polytope};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.81;

/// Spatial wind jet acting on a planar body. The speed decays as
/// `V_w exp(−½ s²)` with `s = p_y cos θ_w − p_x sin θ_w`; the force has
/// magnitude `c l v_w²` and points along `(sin θ_w, −cos θ_w)`, so
/// `θ_w = 0` blows straight down.
#[derive(Debug, Clone, PartialEq)]
pub struct WindField {
    pub speed: f64,
    pub angle_deg: f64,
    pub drag: f64,
    pub length: f64,
}

impl WindField {
    pub fn force(&self, px: f64, py: f64) -> (f64, f64) {
        let th = self.angle_deg.to_radians();
        let s = py * th.cos() - px * th.sin();
        let v = self.speed * (-0.5 * s * s).exp();
        let mag = self.drag * self.length * v * v;
        (mag * th.sin(), -mag * th.cos())
    }
}

/// Ground truth of the unknown term.
#[derive(Debug, Clone)]
pub enum Truth {
    /// `f(x, z) = W φ(x, z)` with the plant's own feature map.
    Linear { w: DMatrix<f64> },
    /// Wind acceleration entering the two velocity rows, scaled by `dt/m`.
    Wind { field: WindField, rows: (usize, usize), pos: (usize, usize), scale: f64 },
}

/// A road traversed at reference speed plus the speed error; the position
/// is the exogenous signal seen by the features.
#[derive(Debug, Clone)]
pub struct Route {
    pub start: f64,
    pub v_ref: f64,
    pub dt: f64,
}

/// `x⁺ = Ax + Bu + f(x, z) + v` with constraints and a feature map.
#[derive(Debug, Clone)]
pub struct Plant {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub x: Polytope,
    pub u: Polytope,
    pub noise: NoiseModel,
    pub truth: Truth,
    pub features: FeatureMap,
    /// Rows of `W` that are unknown; the rest are known to be zero.
    pub estimated_rows: Vec<usize>,
    pub route: Option<Route>,
    pub x0: DVector<f64>,
    /// Half-widths of the state box used for warm-up data.
    pub warmup_box: DVector<f64>,
    /// Range of the exogenous signal used for warm-up data.
    pub warmup_z: Option<(f64, f64)>,
}

impl Plant {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn f_true(&self, x: &DVector<f64>, z: Option<&DVector<f64>>) -> DVector<f64> {
        match &self.truth {
            Truth::Linear { w } => w * self.features.eval(x, z),
            Truth::Wind { field, rows, pos, scale } => {
                let (fx, fy) = field.force(x[pos.0], x[pos.1]);
                let mut f = DVector::zeros(self.state_dim());
                f[rows.0] = scale * fx;
                f[rows.1] = scale * fy;
                f
            }
        }
    }

    /// Exact parameters when the truth lies in the span of the features.
    pub fn w_true(&self) -> Option<DMatrix<f64>> {
        match (&self.truth, &self.features) {
            (Truth::Linear { w }, _) => Some(w.clone()),
            (Truth::Wind { field, rows, scale, .. }, FeatureMap::Ridge { angles_deg, .. }) => {
                let k = angles_deg.iter().position(|a| (a - field.angle_deg).abs() < 1e-12)?;
                let d = angles_deg.len();
                let th = field.angle_deg.to_radians();
                let peak = field.drag * field.length * field.speed * field.speed * scale * (d as f64).sqrt();
                let mut w = DMatrix::zeros(self.state_dim(), d);
                w[(rows.0, k)] = peak * th.sin();
                w[(rows.1, k)] = -peak * th.cos();
                Some(w)
            }
            _ => None,
        }
    }

    pub fn noise_box(&self) -> Hyperbox {
        self.noise.support(self.state_dim())
    }

    /// Advances one step and returns the successor and the noise sample.
    pub fn step<R: Rng + ?Sized>(&self, x: &DVector<f64>, u: &DVector<f64>, z: Option<&DVector<f64>>, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let v = self.noise.sample(self.state_dim(), rng);
        let next = &self.a * x + &self.b * u + self.f_true(x, z) + &v;
        (next, v)
    }

    pub fn z_init(&self) -> Option<DVector<f64>> {
        self.route.as_ref().map(|r| DVector::from_element(1, r.start))
    }

    /// Position update `p⁺ = p + dt (v_ref + e)` driven by the speed error.
    pub fn z_next(&self, z: Option<&DVector<f64>>, x: &DVector<f64>) -> Option<DVector<f64>> {
        let r = self.route.as_ref()?;
        let p = z.map_or(r.start, |z| z[0]);
        Some(DVector::from_element(1, p + r.dt * (r.v_ref + x[0])))
    }

    /// `k` samples `(φ, y)` with states uniform in the warm-up box and the
    /// exogenous signal uniform in its range; `y` holds all state rows.
    pub fn warmup_data<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let n = self.state_dim();
        let mut phis = Vec::with_capacity(k);
        let mut ys = Vec::with_capacity(k);
        for _ in 0..k {
            let x = DVector::from_fn(n, |i, _| {
                let h = self.warmup_box[i];
                if h > 0.0 {
                    rng.random_range(-h..=h)
                } else {
                    0.0
                }
            });
            let z = self.warmup_z.map(|(lo, hi)| DVector::from_element(1, rng.random_range(lo..=hi)));
            let phi = self.features.eval(&x, z.as_ref());
            let y = self.f_true(&x, z.as_ref()) + self.noise.sample(n, rng);
            phis.push(phi);
            ys.push(y);
        }
        (phis, ys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_dim();
        if self.a.shape() != (n, n) || self.b.nrows() != n || self.x.dim() != n || self.u.dim() != m || self.x0.len() != n || self.warmup_box.len() != n {
            return Err(Error::dim("plant shapes"));
        }
        if self.estimated_rows.iter().any(|&r| r >= n) {
            return Err(Error::config("plant.estimated_rows", "row index out of range"));
        }
        self.noise.validate()?;
        self.features.validate()
    }
}

fn box_polytope(half_widths: &[f64]) -> Polytope {
    Hyperbox::symmetric(DVector::from_row_slice(half_widths)).expect("nonnegative").to_polytope()
}

/// Double integrator `A = [[1, 0.2], [0, 1]]`, `B = [0; 1]` with
/// `(−4, −3) ⪯ x ⪯ (4, 3)` and `|u| ≤ 2`. The matched term is
/// `[0, w₁ tanh x₂]`; the unmatched one is `(1/√2)[w₁ sin 4x₁, w₂ tanh x₂]`.
pub fn make_double_integrator(matched: bool, w1: f64, w2: f64, noise: NoiseModel) -> Plant {
    let (features, w, rows) = if matched {
        (FeatureMap::Tanh { index: 1 }, DMatrix::from_row_slice(2, 1, &[0.0, w1]), vec![1])
    } else {
        (FeatureMap::SinTanh, DMatrix::from_row_slice(2, 2, &[w1, 0.0, 0.0, w2]), vec![0, 1])
    };
    Plant {
        name: if matched { "double_integrator_matched" } else { "double_integrator_unmatched" }.into(),
        a: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]),
        b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        x: box_polytope(&[4.0, 3.0]),
        u: box_polytope(&[2.0]),
        noise,
        truth: Truth::Linear { w },
        features,
        estimated_rows: rows,
        route: None,
        x0: DVector::from_row_slice(&[2.0, 2.0]),
        warmup_box: DVector::from_row_slice(&[1.0, 1.0]),
        warmup_z: None,
    }
}

/// Physical constants of the planar quadrotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub inertia: f64,
    pub arm: f64,
    pub dt: f64,
    pub pos_limit: f64,
    pub angle_limit: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        QuadrotorParams {
            mass: 1.0,
            inertia: 0.01,
            arm: 0.2,
            dt: 0.1,
            pos_limit: 2.0,
            angle_limit: 0.5,
        }
    }
}

/// Planar quadrotor linearized about hover and Euler-discretized. State
/// `[p_x, p_y, θ, ṗ_x, ṗ_y, θ̇]`, input the deviation of the front and
/// rear thrusts from `mg/2`, so `0 ≤ thrust ≤ mg` becomes `|δu| ≤ mg/2`.
pub fn make_quadrotor(wind: WindField, angles_deg: Vec<f64>, params: QuadrotorParams, noise: NoiseModel, x0: DVector<f64>) -> Plant {
    let QuadrotorParams {
        mass,
        inertia,
        arm,
        dt,
        pos_limit,
        angle_limit,
    } = params;
    let mut a = DMatrix::identity(6, 6);
    for i in 0..3 {
        a[(i, i + 3)] = dt;
    }
    a[(3, 2)] = -GRAVITY * dt;
    let mut b = DMatrix::zeros(6, 2);
    b[(4, 0)] = dt / mass;
    b[(4, 1)] = dt / mass;
    b[(5, 0)] = dt * arm / inertia;
    b[(5, 1)] = -dt * arm / inertia;
    let x_rows: Vec<usize> = (0..3).collect();
    let limits = [pos_limit, pos_limit, angle_limit];
    let mut xa = DMatrix::zeros(6, 6);
    let mut xb = DVector::zeros(6);
    for (k, &i) in x_rows.iter().enumerate() {
        xa[(2 * k, i)] = 1.0;
        xa[(2 * k + 1, i)] = -1.0;
        xb[2 * k] = limits[k];
        xb[2 * k + 1] = limits[k];
    }
    let hover = mass * GRAVITY / 2.0;
    Plant {
        name: "quadrotor".into(),
        a,
        b,
        x: Polytope::new(xa, xb).expect("pose box"),
        u: box_polytope(&[hover, hover]),
        noise,
        truth: Truth::Wind {
            field: wind,
            rows: (3, 4),
            pos: (0, 1),
            scale: dt / mass,
        },
        features: FeatureMap::Ridge { px: 0, py: 1, angles_deg },
        estimated_rows: vec![3, 4],
        route: None,
        x0,
        warmup_box: DVector::from_row_slice(&[pos_limit, pos_limit, 0.0, 0.0, 0.0, 0.0]),
        warmup_z: None,
    }
}

/// Longitudinal cruise control on a route of inclined segments.
#[derive(Debug, Clone, PartialEq)]
pub struct CruiseParams {
    pub mass: f64,
    pub damping: f64,
    pub dt: f64,
    pub v_ref: f64,
    pub v0: f64,
    /// `(start, end, grade in degrees)` per segment.
    pub segments: Vec<(f64, f64, f64)>,
    pub speed_error_limit: f64,
    pub accel_limit: f64,
}

impl Default for CruiseParams {
    fn default() -> Self {
        CruiseParams {
            mass: 1000.0,
            damping: 20.0,
            dt: 0.1,
            v_ref: 25.0,
            v0: 85.0 / 3.6,
            segments: vec![(50.0, 200.0, 3.0), (250.0, 400.0, -2.0), (450.0, 600.0, 4.0)],
            speed_error_limit: 3.0,
            accel_limit: 3.0,
        }
    }
}

/// Speed-error dynamics `e⁺ = (1 − dt k/m) e + dt u + f(p) + v`. The drag at
/// the reference speed is compensated by feedforward, so `u` is the
/// acceleration command on top of it. The grade force
/// `−(mg/2) Σ sin θ_k (tanh(p − a_k) + tanh(b_k − p))` is exactly
/// `W φ(p)` with the road-segment features.
pub fn make_cruise(params: &CruiseParams, noise: NoiseModel) -> Plant {
    let k = params.segments.len();
    let a = DMatrix::from_element(1, 1, 1.0 - params.dt * params.damping / params.mass);
    let b = DMatrix::from_element(1, 1, params.dt);
    let scale = params.dt * GRAVITY * (k as f64).sqrt();
    let w = DMatrix::from_fn(1, k, |_, j| -scale * params.segments[j].2.to_radians().sin());
    let end = params.segments.iter().map(|s| s.1).fold(0.0, f64::max);
    Plant {
        name: "cruise".into(),
        a,
        b,
        x: box_polytope(&[params.speed_error_limit]),
        u: box_polytope(&[params.accel_limit]),
        noise,
        truth: Truth::Linear { w },
        features: FeatureMap::RoadSegments {
            segments: params.segments.iter().map(|s| (s.0, s.1)).collect(),
        },
        estimated_rows: vec![0],
        route: Some(Route {
            start: 0.0,
            v_ref: params.v_ref,
            dt: params.dt,
        }),
        x0: DVector::from_element(1, params.v0 - params.v_ref),
        warmup_box: DVector::from_element(1, 0.0),
        warmup_z: Some((0.0, end + 50.0)),
    }
}

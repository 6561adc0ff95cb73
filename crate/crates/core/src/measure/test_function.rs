use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Point, MAX_DIM};

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;
type HessianFn = Arc<dyn Fn(&[f64]) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync>;

/// Step of the central-difference fallback for derivatives.
pub const DIFFERENCE_STEP: f64 = 1e-5;

/// `sup |tanh''| = 4 / (3√3)`.
const TANH_SECOND_BOUND: f64 = 0.769_800_358_919_501_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Tanh,
    Sin,
    Cos,
}

impl Profile {
    /// `(g, g', g'')` at `z`.
    fn jet(self, z: f64) -> (f64, f64, f64) {
        match self {
            Profile::Tanh => {
                let g = z.tanh();
                let g1 = 1.0 - g * g;
                (g, g1, -2.0 * g * g1)
            }
            Profile::Sin => {
                let (s, c) = z.sin_cos();
                (s, c, -s)
            }
            Profile::Cos => {
                let (s, c) = z.sin_cos();
                (c, -s, -c)
            }
        }
    }

    fn second_bound(self) -> f64 {
        match self {
            Profile::Tanh => TANH_SECOND_BOUND,
            Profile::Sin | Profile::Cos => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Profile::Tanh => "tanh",
            Profile::Sin => "sin",
            Profile::Cos => "cos",
        }
    }
}

/// A ridge function `± g(w·x + φ)`; serializable description of the
/// functions used by families and residual checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeSpec {
    pub profile: Profile,
    pub direction: Vec<f64>,
    pub phase: f64,
    #[serde(default)]
    pub negated: bool,
}

impl RidgeSpec {
    pub fn tanh(direction: &[f64], phase: f64) -> Self {
        Self {
            profile: Profile::Tanh,
            direction: direction.to_vec(),
            phase,
            negated: false,
        }
    }

    pub fn with_profile(profile: Profile, direction: &[f64], phase: f64) -> Self {
        Self {
            profile,
            direction: direction.to_vec(),
            phase,
            negated: false,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            negated: !self.negated,
            ..self.clone()
        }
    }

    fn id(&self) -> String {
        let sign = if self.negated { "-" } else { "" };
        let dir = if self.direction.len() == 1 {
            format!("{}", self.direction[0])
        } else {
            let parts: Vec<String> = self.direction.iter().map(|v| v.to_string()).collect();
            format!("({})", parts.join(","))
        };
        format!("{sign}{}[w={dir},phi={}]", self.profile.name(), self.phase)
    }
}

/// A bounded test function with (analytic or numerical) first and second
/// derivatives.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    dim: usize,
    spec: Option<RidgeSpec>,
    value: ValueFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
    bound: f64,
    lipschitz_bound: f64,
    second_derivative_bound: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish()
    }
}

impl TestFunction {
    /// Ridge function with analytic derivatives and exact bounds.
    pub fn ridge(spec: RidgeSpec) -> Self {
        let dim = spec.direction.len();
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "ridge direction must have 1 or 2 entries"
        );
        let norm = spec.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = if spec.negated { -1.0 } else { 1.0 };
        let mut w = [0.0; MAX_DIM];
        w[..dim].copy_from_slice(&spec.direction);
        let (profile, phase) = (spec.profile, spec.phase);
        let arg = move |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + phase;
        let value: ValueFn = Arc::new(move |x| sign * profile.jet(arg(x)).0);
        let gradient: GradientFn = Arc::new(move |x| {
            let g1 = sign * profile.jet(arg(x)).1;
            [g1 * w[0], g1 * w[1]]
        });
        let hessian: HessianFn = Arc::new(move |x| {
            let g2 = sign * profile.jet(arg(x)).2;
            [
                [g2 * w[0] * w[0], g2 * w[0] * w[1]],
                [g2 * w[1] * w[0], g2 * w[1] * w[1]],
            ]
        });
        Self {
            id: spec.id(),
            dim,
            bound: 1.0,
            lipschitz_bound: norm,
            second_derivative_bound: norm * norm * profile.second_bound(),
            spec: Some(spec),
            value,
            gradient: Some(gradient),
            hessian: Some(hessian),
        }
    }

    /// Arbitrary closure; derivatives fall back to central differences until
    /// registered with [`with_gradient`](Self::with_gradient) /
    /// [`with_hessian`](Self::with_hessian).
    pub fn from_fn(
        id: &str,
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        bound: f64,
        lipschitz_bound: f64,
        second_derivative_bound: f64,
    ) -> Self {
        Self {
            id: id.to_string(),
            dim,
            spec: None,
            value: Arc::new(f),
            gradient: None,
            hessian: None,
            bound,
            lipschitz_bound,
            second_derivative_bound,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Point + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[f64]) -> [[f64; MAX_DIM]; MAX_DIM] + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(h));
        self
    }

    /// `-f`, with the same bounds.
    pub fn negated(&self) -> Self {
        if let Some(spec) = &self.spec {
            return Self::ridge(spec.negated());
        }
        let v = self.value.clone();
        let mut out = Self::from_fn(
            &format!("-{}", self.id),
            self.dim,
            move |x| -v(x),
            self.bound,
            self.lipschitz_bound,
            self.second_derivative_bound,
        );
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |x| {
                let v = g(x);
                [-v[0], -v[1]]
            });
        }
        if let Some(h) = self.hessian.clone() {
            out = out.with_hessian(move |x| {
                let m = h(x);
                [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]
            });
        }
        out
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> Option<&RidgeSpec> {
        self.spec.as_ref()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn second_derivative_bound(&self) -> f64 {
        self.second_derivative_bound
    }

    /// Whether both derivatives are registered closures (not differences).
    pub fn has_analytic_derivatives(&self) -> bool {
        self.gradient.is_some() && self.hessian.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let h = DIFFERENCE_STEP;
        let mut out = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        for i in 0..self.dim {
            p[..self.dim].copy_from_slice(&x[..self.dim]);
            p[i] = x[i] + h;
            let fp = self.eval(&p[..self.dim]);
            p[i] = x[i] - h;
            let fm = self.eval(&p[..self.dim]);
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    pub fn hessian(&self, x: &[f64]) -> [[f64; MAX_DIM]; MAX_DIM] {
        if let Some(hf) = &self.hessian {
            return hf(x);
        }
        let h = DIFFERENCE_STEP;
        let d = self.dim;
        let f0 = self.eval(&x[..d]);
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        let shifted = |di: f64, dj: f64, i: usize, j: usize| {
            let mut p = [0.0; MAX_DIM];
            p[..d].copy_from_slice(&x[..d]);
            p[i] += di;
            p[j] += dj;
            self.eval(&p[..d])
        };
        for i in 0..d {
            out[i][i] = (shifted(h, 0.0, i, i) - 2.0 * f0 + shifted(-h, 0.0, i, i)) / (h * h);
            for j in (i + 1)..d {
                let v = (shifted(h, h, i, j) - shifted(h, -h, i, j) - shifted(-h, h, i, j)
                    + shifted(-h, -h, i, j))
                    / (4.0 * h * h);
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        out
    }
}

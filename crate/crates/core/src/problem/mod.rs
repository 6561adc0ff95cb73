//! Coefficients of the Kolmogorov operator `L = ½ a_ij ∂_i∂_j + b_i ∂_i`,
//! their validation, and the preset problem catalog.
//!
//! All evolution in this crate is in the weak form through `L`: a curve
//! `(μ_t)` solves the equation when `∫f dμ_t − ∫f dν = ∫_s^t ∫ L_u f dμ_u du`.

pub mod expr;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DomainBox, GridSpec, Measure, Point, TestFunction, MAX_DIM};
pub use expr::Expr;
pub use validate::{
    continuity_modulus, validate_coefficients, CheckOutcome, CoefficientField, ProbeSpec,
    ValidationReport, Worst,
};

pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];
pub type DiffusionField = Arc<dyn Fn(f64, &[f64]) -> Matrix + Send + Sync>;
pub type DriftField = Arc<dyn Fn(f64, &[f64]) -> Point + Send + Sync>;

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 4] = ["heat", "zero", "sqrt_branch", "ou_tanh"];

/// Diffusion matrix and drift vector fields with their declared bounds.
#[derive(Clone)]
pub struct Coefficients {
    dim: usize,
    horizon: f64,
    a: DiffusionField,
    b: DriftField,
    sup_bound_a: f64,
    sup_bound_b: f64,
    time_homogeneous: bool,
    degenerate: bool,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("sup_bound_a", &self.sup_bound_a)
            .field("sup_bound_b", &self.sup_bound_b)
            .field("time_homogeneous", &self.time_homogeneous)
            .field("degenerate", &self.degenerate)
            .finish()
    }
}

impl Coefficients {
    pub fn new(
        dim: usize,
        horizon: f64,
        a: impl Fn(f64, &[f64]) -> Matrix + Send + Sync + 'static,
        b: impl Fn(f64, &[f64]) -> Point + Send + Sync + 'static,
        sup_bound_a: f64,
        sup_bound_b: f64,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidProblem(format!(
                "dimension {dim} not in 1..=2"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "horizon {horizon} must be > 0"
            )));
        }
        if !(sup_bound_a >= 0.0 && sup_bound_b >= 0.0) {
            return Err(Error::InvalidProblem(
                "coefficient bounds must be >= 0".into(),
            ));
        }
        Ok(Self {
            dim,
            horizon,
            a: Arc::new(a),
            b: Arc::new(b),
            sup_bound_a,
            sup_bound_b,
            time_homogeneous: false,
            degenerate: false,
        })
    }

    /// Declare that neither field depends on `t`; solvers may then cache
    /// coefficient values.
    pub fn time_homogeneous(mut self) -> Self {
        self.time_homogeneous = true;
        self
    }

    /// Declare `a ≡ 0`.
    pub fn degenerate(mut self) -> Self {
        self.degenerate = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sup_bound_a(&self) -> f64 {
        self.sup_bound_a
    }

    pub fn sup_bound_b(&self) -> f64 {
        self.sup_bound_b
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Raw diffusion matrix, no clamping.
    pub fn a(&self, t: f64, x: &[f64]) -> Matrix {
        (self.a)(t, x)
    }

    /// Raw drift, no clamping.
    pub fn b(&self, t: f64, x: &[f64]) -> Point {
        (self.b)(t, x)
    }

    /// Same diffusion, new drift.
    pub fn with_drift(
        &self,
        b: impl Fn(f64, &[f64]) -> Point + Send + Sync + 'static,
        sup_bound_b: f64,
    ) -> Self {
        Self {
            b: Arc::new(b),
            sup_bound_b,
            ..self.clone()
        }
    }
}

/// Closed-form marginals known for some presets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownSolution {
    /// `μ_t = ν * N(0, (t − s)·rate·I)`.
    HeatKernel { rate: f64 },
    /// `μ_t = ν`.
    Stationary,
}

impl KnownSolution {
    /// `∫|x|² dμ_t`.
    pub fn second_moment(&self, nu: &Measure, s: f64, t: f64) -> f64 {
        match self {
            KnownSolution::HeatKernel { rate } => {
                nu.second_moment() + nu.dim() as f64 * rate * (t - s)
            }
            KnownSolution::Stationary => nu.second_moment(),
        }
    }

    /// The marginal at `t`, discretized on `grid` when one is given.
    pub fn marginal(
        &self,
        nu: &Measure,
        s: f64,
        t: f64,
        grid: Option<&GridSpec>,
    ) -> Result<Measure> {
        match self {
            KnownSolution::Stationary => match grid {
                Some(g) => nu.deposit(g),
                None => Ok(nu.clone()),
            },
            KnownSolution::HeatKernel { rate } => {
                let g = grid.ok_or_else(|| {
                    Error::InvalidProblem("the heat kernel marginal needs a grid".into())
                })?;
                let var = rate * (t - s);
                if var <= 0.0 {
                    return nu.deposit(g);
                }
                let d = nu.dim();
                let atoms: Vec<(Point, f64)> = nu.iter().collect();
                let norm = (2.0 * std::f64::consts::PI * var).powi(d as i32).sqrt();
                Measure::from_density(g.clone(), move |x| {
                    atoms
                        .iter()
                        .map(|(c, w)| {
                            let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
                            w * (-0.5 * r2 / var).exp() / norm
                        })
                        .sum()
                })
            }
        }
    }
}

/// Cauchy-problem data: coefficients, computational box and provenance.
#[derive(Clone, Debug)]
pub struct Problem {
    pub coefficients: Coefficients,
    pub domain_box: DomainBox,
    pub preset_id: String,
    pub known_solution: Option<KnownSolution>,
}

impl Problem {
    pub fn new(coefficients: Coefficients, domain_box: DomainBox, preset_id: &str) -> Result<Self> {
        if domain_box.dim() != coefficients.dim() {
            return Err(Error::DimensionMismatch {
                left: domain_box.dim(),
                right: coefficients.dim(),
            });
        }
        Ok(Self {
            coefficients,
            domain_box,
            preset_id: preset_id.to_string(),
            known_solution: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim
    }

    pub fn horizon(&self) -> f64 {
        self.coefficients.horizon
    }

    /// Diffusion matrix, extended constantly outside the domain box.
    pub fn diffusion(&self, t: f64, x: &[f64]) -> Matrix {
        let p = self.domain_box.clamp(x);
        self.coefficients.a(t, &p[..self.dim()])
    }

    /// Drift, extended constantly outside the domain box.
    pub fn drift(&self, t: f64, x: &[f64]) -> Point {
        let p = self.domain_box.clamp(x);
        self.coefficients.b(t, &p[..self.dim()])
    }

    /// `L_t f(x) = ½ a_ij ∂_i∂_j f + b_i ∂_i f`.
    pub fn generator(&self, t: f64, x: &[f64], f: &TestFunction) -> f64 {
        let d = self.dim();
        let b = self.drift(t, x);
        let grad = f.gradient(x);
        let mut out: f64 = (0..d).map(|i| b[i] * grad[i]).sum();
        if !self.coefficients.degenerate {
            let a = self.diffusion(t, x);
            let hess = f.hessian(x);
            for i in 0..d {
                for j in 0..d {
                    out += 0.5 * a[i][j] * hess[i][j];
                }
            }
        }
        out
    }

    /// Same problem with the drift replaced.
    pub fn with_drift(
        &self,
        b: impl Fn(f64, &[f64]) -> Point + Send + Sync + 'static,
        sup_bound_b: f64,
        label: &str,
    ) -> Self {
        Self {
            coefficients: self.coefficients.with_drift(b, sup_bound_b),
            domain_box: self.domain_box.clone(),
            preset_id: format!("{}+{label}", self.preset_id),
            known_solution: None,
        }
    }

    /// Build a problem from expression strings. For `dim == 1`, `a` has one
    /// entry; for `dim == 2`, `a = [a11, a12, a22]` and `b = [b1, b2]`.
    pub fn custom(
        dim: usize,
        horizon: f64,
        a: &[String],
        b: &[String],
        domain_box: DomainBox,
    ) -> Result<Self> {
        let want_a = if dim == 1 { 1 } else { 3 };
        if a.len() != want_a || b.len() != dim {
            return Err(Error::InvalidProblem(format!(
                "dimension {dim} needs {want_a} diffusion and {dim} drift expressions"
            )));
        }
        let a_exprs: Vec<Expr> = a
            .iter()
            .map(|s| Expr::parse(s, dim))
            .collect::<Result<_>>()?;
        let b_exprs: Vec<Expr> = b
            .iter()
            .map(|s| Expr::parse(s, dim))
            .collect::<Result<_>>()?;
        let homogeneous = !a_exprs.iter().chain(&b_exprs).any(Expr::mentions_time);
        let degenerate = a_exprs.iter().all(|e| e.constant() == Some(0.0));

        let (ae, be) = (Arc::new(a_exprs), Arc::new(b_exprs));
        let a_field = {
            let ae = ae.clone();
            move |t: f64, x: &[f64]| -> Matrix {
                if ae.len() == 1 {
                    [[ae[0].eval(t, x), 0.0], [0.0, 0.0]]
                } else {
                    let off = ae[1].eval(t, x);
                    [[ae[0].eval(t, x), off], [off, ae[2].eval(t, x)]]
                }
            }
        };
        let b_field = {
            let be = be.clone();
            move |t: f64, x: &[f64]| -> Point {
                let mut p = [0.0; MAX_DIM];
                for (i, e) in be.iter().enumerate() {
                    p[i] = e.eval(t, x);
                }
                p
            }
        };
        let (sup_a, sup_b) = sample_bounds(dim, horizon, &domain_box, &a_field, &b_field);
        let mut c = Coefficients::new(dim, horizon, a_field, b_field, sup_a, sup_b)?;
        if homogeneous {
            c = c.time_homogeneous();
        }
        if degenerate {
            c = c.degenerate();
        }
        Problem::new(c, domain_box, "custom")
    }
}

/// Sampled sup-norms of the fields over the box, with 10% headroom.
fn sample_bounds(
    dim: usize,
    horizon: f64,
    domain: &DomainBox,
    a: &impl Fn(f64, &[f64]) -> Matrix,
    b: &impl Fn(f64, &[f64]) -> Point,
) -> (f64, f64) {
    let probes = ProbeSpec::uniform(domain, horizon, 41);
    let (mut sa, mut sb) = (0.0_f64, 0.0_f64);
    for &t in &probes.times {
        for x in &probes.points {
            let m = a(t, &x[..dim]);
            let v = b(t, &x[..dim]);
            for i in 0..dim {
                sb = sb.max(v[i].abs());
                for j in 0..dim {
                    sa = sa.max(m[i][j].abs());
                }
            }
        }
    }
    (sa * 1.1, sb * 1.1)
}

fn constant_a(v: f64) -> impl Fn(f64, &[f64]) -> Matrix + Send + Sync {
    move |_, _| [[v, 0.0], [0.0, 0.0]]
}

/// `b(x) = min(√max(x, 0), 1)`.
pub fn sqrt_drift(x: f64) -> f64 {
    x.max(0.0).sqrt().min(1.0)
}

/// Preset catalog: `heat`, `zero`, `sqrt_branch`, `ou_tanh`. All are
/// one-dimensional with horizon 1.
pub fn preset(name: &str) -> Result<Problem> {
    let horizon = 1.0;
    let problem = match name {
        "heat" => {
            let c = Coefficients::new(1, horizon, constant_a(1.0), |_, _| [0.0; 2], 1.0, 0.0)?
                .time_homogeneous();
            let mut p = Problem::new(c, DomainBox::symmetric(1, 8.0), name)?;
            p.known_solution = Some(KnownSolution::HeatKernel { rate: 1.0 });
            p
        }
        "zero" => {
            let c = Coefficients::new(1, horizon, constant_a(0.0), |_, _| [0.0; 2], 0.0, 0.0)?
                .time_homogeneous()
                .degenerate();
            let mut p = Problem::new(c, DomainBox::symmetric(1, 8.0), name)?;
            p.known_solution = Some(KnownSolution::Stationary);
            p
        }
        "sqrt_branch" => {
            let c = Coefficients::new(
                1,
                horizon,
                constant_a(0.0),
                |_, x| [sqrt_drift(x[0]), 0.0],
                0.0,
                1.0,
            )?
            .time_homogeneous()
            .degenerate();
            Problem::new(c, DomainBox::symmetric(1, 2.0), name)?
        }
        "ou_tanh" => {
            let c = Coefficients::new(
                1,
                horizon,
                constant_a(1.0),
                |_, x| [-x[0].tanh(), 0.0],
                1.0,
                1.0,
            )?
            .time_homogeneous();
            Problem::new(c, DomainBox::symmetric(1, 8.0), name)?
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESETS.join(", "),
            })
        }
    };
    Ok(problem)
}

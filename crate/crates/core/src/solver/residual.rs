//! Weak-form residual
//! `|∫f dμ_{t2} − ∫f dμ_{t1} − ∫_{t1}^{t2} ∫ L_u f dμ_u du|` with the time
//! integral taken by the trapezoid rule on the curve's own sample times.
//!
//! Per test function we store `R_k = ∫f dμ_{t_k} − I_k` where `I_k` is the
//! cumulative trapezoid sum, so the residual of any pair of sample times is
//! `|R_j − R_i|` and the worst pair is found in one pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SolutionCurve;
use crate::error::{Error, Result};
use crate::measure::{GridSpec, Profile, RidgeSpec, TestFunction};
use crate::problem::Problem;

/// Result of a full residual sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualCertificate {
    /// Largest residual over every test function and every pair of times.
    pub value: f64,
    pub functions: Vec<String>,
    pub times: usize,
    pub worst_function: String,
    pub worst_pair: (f64, f64),
}

/// Low-frequency family used to certify curves: `tanh(ω·x + φ)` with
/// `ω ∈ {½, 1}` (along each axis and the diagonal in 2D), `φ ∈ {0, ±1}`,
/// plus `sin` and `cos` along each axis.
pub fn standard_residual_family(dim: usize) -> Vec<TestFunction> {
    let dirs: Vec<Vec<f64>> = if dim == 1 {
        vec![vec![1.0]]
    } else {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![r, r]]
    };
    let mut out = Vec::new();
    for dir in &dirs {
        for omega in [0.5, 1.0] {
            let w: Vec<f64> = dir.iter().map(|c| c * omega).collect();
            for phi in [0.0, 1.0, -1.0] {
                out.push(TestFunction::ridge(RidgeSpec::tanh(&w, phi)));
            }
        }
    }
    for dir in dirs.iter().take(dim) {
        for profile in [Profile::Sin, Profile::Cos] {
            out.push(TestFunction::ridge(RidgeSpec::with_profile(
                profile, dir, 0.0,
            )));
        }
    }
    out
}

struct Cache {
    grid: GridSpec,
    f: Vec<f64>,
    lf: Vec<f64>,
}

fn check(v: f64, f: &TestFunction, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            id: f.id().to_string(),
            point: x.to_vec(),
        })
    }
}

/// `R_k` for one test function.
fn defect_profile(curve: &SolutionCurve, p: &Problem, f: &TestFunction) -> Result<Vec<f64>> {
    if f.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            left: f.dim(),
            right: p.dim(),
        });
    }
    let d = p.dim();
    let homogeneous = p.coefficients.is_time_homogeneous();
    let mut cache: Option<Cache> = None;
    let mut fv = Vec::with_capacity(curve.times().len());
    let mut gv = Vec::with_capacity(curve.times().len());
    for (&t, m) in curve.times().iter().zip(curve.marginals()) {
        let (mut a, mut b) = (0.0, 0.0);
        match m.grid().filter(|_| homogeneous) {
            Some(g) => {
                if cache.as_ref().map(|c| &c.grid != g).unwrap_or(true) {
                    let mut cf = Vec::with_capacity(g.len());
                    let mut cl = Vec::with_capacity(g.len());
                    for i in 0..g.len() {
                        let x = g.center(i);
                        cf.push(check(f.eval(&x[..d]), f, &x[..d])?);
                        cl.push(check(p.generator(t, &x[..d], f), f, &x[..d])?);
                    }
                    cache = Some(Cache {
                        grid: g.clone(),
                        f: cf,
                        lf: cl,
                    });
                }
                let c = cache.as_ref().unwrap();
                for ((w, vf), vl) in m.weights().iter().zip(&c.f).zip(&c.lf) {
                    if *w != 0.0 {
                        a += w * vf;
                        b += w * vl;
                    }
                }
            }
            None => {
                for (x, w) in m.iter() {
                    a += w * check(f.eval(&x[..d]), f, &x[..d])?;
                    b += w * check(p.generator(t, &x[..d], f), f, &x[..d])?;
                }
            }
        }
        fv.push(a);
        gv.push(b);
    }
    let times = curve.times();
    let mut r = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    r.push(fv[0]);
    for k in 1..times.len() {
        integral += 0.5 * (gv[k - 1] + gv[k]) * (times[k] - times[k - 1]);
        r.push(fv[k] - integral);
    }
    Ok(r)
}

fn profiles(curve: &SolutionCurve, p: &Problem, fs: &[TestFunction]) -> Result<Vec<Vec<f64>>> {
    if fs.is_empty() {
        return Err(Error::InvalidCurve("empty test-function family".into()));
    }
    if curve.initial().dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            left: curve.initial().dim(),
            right: p.dim(),
        });
    }
    fs.par_iter().map(|f| defect_profile(curve, p, f)).collect()
}

/// Maximal residual over `fs` and the given pairs of sample times.
pub fn weak_residual(
    curve: &SolutionCurve,
    p: &Problem,
    fs: &[TestFunction],
    pairs: &[(f64, f64)],
) -> Result<f64> {
    let mut idx = Vec::with_capacity(pairs.len());
    for &(t1, t2) in pairs {
        let bad = || Error::TimePair {
            t1,
            t2,
            s: curve.s(),
            horizon: curve.horizon(),
        };
        let i = curve.index_of(t1).ok_or_else(bad)?;
        let j = curve.index_of(t2).ok_or_else(bad)?;
        if i > j {
            return Err(bad());
        }
        idx.push((i, j));
    }
    let rs = profiles(curve, p, fs)?;
    Ok(rs
        .iter()
        .flat_map(|r| idx.iter().map(move |&(i, j)| (r[j] - r[i]).abs()))
        .fold(0.0, f64::max))
}

/// Residual over `fs` and every pair of sample times.
pub fn weak_residual_all_pairs(
    curve: &SolutionCurve,
    p: &Problem,
    fs: &[TestFunction],
) -> Result<ResidualCertificate> {
    let rs = profiles(curve, p, fs)?;
    let times = curve.times();
    let mut best = (0.0, 0, 0, 0);
    for (n, r) in rs.iter().enumerate() {
        let (mut lo, mut hi) = (0usize, 0usize);
        for j in 1..r.len() {
            for i in [lo, hi] {
                let v = (r[j] - r[i]).abs();
                if v > best.0 {
                    best = (v, n, i, j);
                }
            }
            if r[j] < r[lo] {
                lo = j;
            }
            if r[j] > r[hi] {
                hi = j;
            }
        }
    }
    Ok(ResidualCertificate {
        value: best.0,
        functions: fs.iter().map(|f| f.id().to_string()).collect(),
        times: times.len(),
        worst_function: fs[best.1].id().to_string(),
        worst_pair: (times[best.2], times[best.3]),
    })
}

/// `max_f max_k |∫f dμ_{t_{k+1}} − ∫f dμ_{t_k}|`.
pub fn narrow_continuity_modulus(curve: &SolutionCurve, fs: &[TestFunction]) -> Result<f64> {
    if curve.times().len() < 2 {
        return Err(Error::InvalidCurve(
            "continuity modulus needs at least two sample times".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for f in fs {
        let mut prev: Option<f64> = None;
        for m in curve.marginals() {
            let v = crate::measure::integrate(m, f)?;
            if let Some(p) = prev {
                worst = worst.max((v - p).abs());
            }
            prev = Some(v);
        }
    }
    Ok(worst)
}

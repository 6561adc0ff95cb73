//! Transport of atoms along `ẋ = b(t, x)` when the diffusion vanishes.

use super::{curve::Provenance, SolutionCurve, SolverSettings};
use crate::error::{Error, Result};
use crate::measure::{Measure, Point};
use crate::problem::Problem;

/// One classical RK4 step of `ẋ = b(t, x)`.
pub fn rk4_step(p: &Problem, t: f64, x: Point, dt: f64) -> Point {
    let d = p.dim();
    let shift = |x: Point, k: Point, h: f64| {
        let mut y = x;
        for i in 0..d {
            y[i] += h * k[i];
        }
        y
    };
    let k1 = p.drift(t, &x[..d]);
    let k2 = p.drift(t + 0.5 * dt, &shift(x, k1, 0.5 * dt)[..d]);
    let k3 = p.drift(t + 0.5 * dt, &shift(x, k2, 0.5 * dt)[..d]);
    let k4 = p.drift(t + dt, &shift(x, k3, dt)[..d]);
    let mut y = x;
    for i in 0..d {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    y
}

/// Positions of one atom at the record times from index `i0` on. With
/// `depart`, the first record interval follows the exact departure from the
/// rest point of `ẋ = √x`, `x(h) = (h/2)²`, along the first axis: RK4 cannot
/// leave the rest point on its own and is inaccurate right next to it.
pub(crate) fn integrate_path(
    p: &Problem,
    settings: &SolverSettings,
    i0: usize,
    x0: Point,
    depart: bool,
) -> Result<Vec<Point>> {
    let (substeps, dt) = settings.substeps()?;
    let record = settings.record;
    let mut x = x0;
    let mut out = Vec::with_capacity(record.intervals + 1 - i0);
    out.push(x);
    for rec in i0..record.intervals {
        let t0 = record.time(rec);
        for k in 0..substeps {
            if depart && rec == i0 {
                x[0] = x0[0] + (0.5 * (k + 1) as f64 * dt).powi(2);
            } else {
                x = rk4_step(p, t0 + k as f64 * dt, x, dt);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "characteristic from {x0:?} is not finite at t = {}",
                record.time(rec + 1)
            )));
        }
        out.push(x);
    }
    Ok(out)
}

/// Assemble atomic marginals from per-atom paths, checking the box.
pub(crate) fn curve_from_paths(
    p: &Problem,
    settings: &SolverSettings,
    i0: usize,
    paths: &[Vec<Point>],
    weights: &[f64],
    provenance: Provenance,
    label: String,
) -> Result<SolutionCurve> {
    let record = settings.record;
    let d = p.dim();
    let mut times = Vec::with_capacity(paths[0].len());
    let mut marginals = Vec::with_capacity(paths[0].len());
    for k in 0..paths[0].len() {
        let t = record.time(i0 + k);
        let xs: Vec<Point> = paths.iter().map(|path| path[k]).collect();
        let outside: f64 = xs
            .iter()
            .zip(weights)
            .filter(|(x, _)| !p.domain_box.contains(&x[..d]))
            .map(|(_, w)| w)
            .sum();
        if outside > super::BOUNDARY_MASS_LIMIT {
            return Err(Error::BoundaryMass {
                mass: outside,
                time: t,
            });
        }
        times.push(t);
        marginals.push(Measure::from_points(d, xs, weights.to_vec())?);
    }
    SolutionCurve::new(times, marginals, provenance, label)
}

pub(super) fn transport(
    p: &Problem,
    s: f64,
    nu: &Measure,
    settings: &SolverSettings,
) -> Result<SolutionCurve> {
    let i0 = settings.record.index_of(s)?;
    let paths = (0..nu.len())
        .map(|i| integrate_path(p, settings, i0, nu.location(i), false))
        .collect::<Result<Vec<_>>>()?;
    let label = format!("characteristics[{}]", p.preset_id);
    curve_from_paths(
        p,
        settings,
        i0,
        &paths,
        nu.weights(),
        Provenance::Solver,
        label,
    )
}

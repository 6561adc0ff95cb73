//! Explicit finite-volume scheme on a uniform grid with zero-flux boundary.
//!
//! Face flux along an axis (mass units, per unit time):
//!
//! ```text
//! J = b (θ m_L + (1 − θ) m_R) / Δx − ½ (a_R m_R − a_L m_L) / Δx²
//! ```
//!
//! with θ the most central weight that keeps the off-diagonal update
//! coefficients nonnegative (pure upwind when `a = 0`). The 2D cross term
//! `∂x∂y(a₁₂ m)` is added in x-flux form so mass is conserved exactly.

use super::{curve::Provenance, SolutionCurve, SolverSettings};
use crate::error::{Error, Result};
use crate::measure::{GridSpec, Measure};
use crate::problem::Problem;

/// Mass drift that triggers a warning.
const MASS_WARN: f64 = 1e-9;
/// Mass drift that aborts the run.
const MASS_FAIL: f64 = 1e-6;

/// Largest explicit step keeping the update coefficients nonnegative.
pub fn stable_time_step(p: &Problem, dx: f64) -> f64 {
    let d = p.dim() as f64;
    let c = &p.coefficients;
    let denom = d * c.sup_bound_a() + 2.0 * d * c.sup_bound_b() * dx;
    if denom > 0.0 {
        dx * dx / denom
    } else {
        f64::INFINITY
    }
}

struct Face {
    left: usize,
    right: usize,
    cl: f64,
    cr: f64,
}

struct Operator {
    faces: Vec<Face>,
    /// `a₁₂` per cell, present only when some entry is nonzero.
    cross: Option<Vec<f64>>,
}

fn upwind_weight(b: f64, a_left: f64, a_right: f64, dx: f64) -> f64 {
    if b > 0.0 {
        (1.0 - a_right / (2.0 * b * dx)).clamp(0.5, 1.0)
    } else if b < 0.0 {
        (a_left / (2.0 * b.abs() * dx)).clamp(0.0, 0.5)
    } else {
        0.5
    }
}

fn build_operator(p: &Problem, grid: &GridSpec, t: f64) -> Operator {
    let d = grid.dim();
    let dx = grid.spacing();
    let n = grid.len();
    let centers: Vec<_> = (0..n).map(|i| grid.center(i)).collect();
    let diff: Vec<_> = centers.iter().map(|c| p.diffusion(t, &c[..d])).collect();
    let mut faces = Vec::new();
    for axis in 0..d {
        for left in 0..n {
            let (ix, iy) = grid.unflat(left);
            let right = match axis {
                0 if ix + 1 < grid.cells()[0] => grid.flat(ix + 1, iy),
                1 if iy + 1 < grid.cells()[1] => grid.flat(ix, iy + 1),
                _ => continue,
            };
            let mut mid = centers[left];
            mid[axis] += 0.5 * dx;
            let b = p.drift(t, &mid[..d])[axis];
            let (al, ar) = (diff[left][axis][axis], diff[right][axis][axis]);
            let theta = upwind_weight(b, al, ar, dx);
            faces.push(Face {
                left,
                right,
                cl: b * theta / dx + 0.5 * al / (dx * dx),
                cr: b * (1.0 - theta) / dx - 0.5 * ar / (dx * dx),
            });
        }
    }
    let cross = (d == 2)
        .then(|| diff.iter().map(|a| a[0][1]).collect::<Vec<_>>())
        .filter(|v| v.iter().any(|&x| x != 0.0));
    Operator { faces, cross }
}

fn apply(op: &Operator, grid: &GridSpec, m: &[f64], out: &mut [f64], dt: f64) {
    out.copy_from_slice(m);
    for f in &op.faces {
        let j = dt * (f.cl * m[f.left] + f.cr * m[f.right]);
        out[f.left] -= j;
        out[f.right] += j;
    }
    if let Some(a12) = &op.cross {
        let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
        let dx2 = grid.spacing() * grid.spacing();
        let g = |ix: usize, iy: isize| -> f64 {
            if iy < 0 || iy as usize >= ny {
                0.0
            } else {
                let k = grid.flat(ix, iy as usize);
                a12[k] * m[k]
            }
        };
        // G on x-face (ix+½, iy): centred ∂y(a₁₂ m), averaged over both cells.
        for iy in 0..ny {
            let y = iy as isize;
            for ix in 0..nx - 1 {
                let gf = (g(ix, y + 1) + g(ix + 1, y + 1) - g(ix, y - 1) - g(ix + 1, y - 1))
                    / (4.0 * dx2);
                let j = dt * gf;
                out[grid.flat(ix + 1, iy)] -= j;
                out[grid.flat(ix, iy)] += j;
            }
        }
    }
}

pub(super) fn evolve(
    p: &Problem,
    s: f64,
    start: &Measure,
    grid: &GridSpec,
    settings: &SolverSettings,
) -> Result<SolutionCurve> {
    let (substeps, dt) = settings.substeps()?;
    let stable_dt = stable_time_step(p, grid.spacing());
    if dt > stable_dt * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, stable_dt });
    }
    let record = settings.record;
    let i0 = record.index_of(s)?;
    let homogeneous = p.coefficients.is_time_homogeneous();
    let cached = homogeneous.then(|| build_operator(p, grid, 0.0));

    let mut m = start.weights().to_vec();
    let mut next = vec![0.0; m.len()];
    let mut times = vec![record.time(i0)];
    let mut marginals = vec![start.clone()];
    let mut clipped = 0.0;
    let mut warned = false;
    for rec in i0..record.intervals {
        let t0 = record.time(rec);
        for k in 0..substeps {
            let t = t0 + k as f64 * dt;
            let fresh;
            let op = match &cached {
                Some(op) => op,
                None => {
                    fresh = build_operator(p, grid, t);
                    &fresh
                }
            };
            apply(op, grid, &m, &mut next, dt);
            std::mem::swap(&mut m, &mut next);
            let mut total = 0.0;
            for w in m.iter_mut() {
                if *w < 0.0 {
                    clipped -= *w;
                    *w = 0.0;
                }
                total += *w;
            }
            let drift = (total - 1.0).abs();
            if drift > MASS_FAIL {
                return Err(Error::MassDrift {
                    drift,
                    time: t + dt,
                });
            }
            if drift > MASS_WARN && !warned {
                log::warn!("mass drift {drift:e} at t = {}", t + dt);
                warned = true;
            }
        }
        times.push(record.time(rec + 1));
        marginals.push(Measure::on_grid(grid.clone(), m.clone())?);
    }
    if clipped > 0.0 {
        log::info!("clipped {clipped:e} of negative mass over the run");
    }
    let label = format!("solver[{}]", p.preset_id);
    SolutionCurve::new(times, marginals, Provenance::Solver, label)
}

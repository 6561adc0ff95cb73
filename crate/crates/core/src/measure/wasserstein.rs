use std::f64::consts::PI;

use super::{Measure, Support};
use crate::error::{Error, Result};

/// Number of projection directions used for two-dimensional measures.
pub const SLICED_DIRECTIONS: usize = 64;

/// Unit directions `(cos θ_k, sin θ_k)`, `θ_k = πk/64`.
pub fn sliced_directions() -> Vec<[f64; 2]> {
    (0..SLICED_DIRECTIONS)
        .map(|k| {
            let th = PI * k as f64 / SLICED_DIRECTIONS as f64;
            [th.cos(), th.sin()]
        })
        .collect()
}

/// W₁ distance. Exact in one dimension (L¹ distance of the CDFs); in two
/// dimensions the sliced surrogate averaged over [`SLICED_DIRECTIONS`] fixed
/// directions.
pub fn wasserstein1(m1: &Measure, m2: &Measure) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch {
            left: m1.dim(),
            right: m2.dim(),
        });
    }
    if m1.dim() == 1 {
        return Ok(w1_sorted(&sorted_line(m1), &sorted_line(m2)));
    }
    let total: f64 = sliced_directions()
        .iter()
        .map(|dir| w1_sorted(&projected(m1, dir), &projected(m2, dir)))
        .sum();
    Ok(total / SLICED_DIRECTIONS as f64)
}

fn sorted_line(m: &Measure) -> Vec<(f64, f64)> {
    // Atoms are stored sorted and grid cells are ordered along the axis.
    match m.support() {
        Support::Atoms { locations, .. } => locations
            .iter()
            .zip(m.weights())
            .map(|(p, w)| (p[0], *w))
            .collect(),
        Support::Grid(g) => (0..g.len())
            .map(|i| (g.center(i)[0], m.weights()[i]))
            .collect(),
    }
}

fn projected(m: &Measure, dir: &[f64; 2]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = m
        .iter()
        .map(|(x, w)| (x[0] * dir[0] + x[1] * dir[1], w))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// `∫ |F_a − F_b| dx` for two sorted atom lists.
fn w1_sorted(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut prev: Option<f64> = None;
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        if let Some(p) = prev {
            acc += (fa - fb).abs() * (x - p);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    acc
}

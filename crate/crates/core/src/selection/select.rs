use serde::{Deserialize, Serialize};

use super::{Enumeration, MeasureDeterminingFamily};
use crate::error::{Error, Result};
use crate::family::CandidateSet;
use crate::measure::{integrate, wasserstein1, Measure};
use crate::solver::SolutionCurve;

/// Tie tolerance for atomic candidates.
pub const ATOMIC_TIE_TOLERANCE: f64 = 1e-9;
/// Tie tolerance for grid candidates.
pub const GRID_TIE_TOLERANCE: f64 = 1e-6;

/// Default tie tolerance for a candidate set, by representation.
pub fn default_tie_tolerance(cs: &CandidateSet) -> f64 {
    if cs.nu().is_atomic() {
        ATOMIC_TIE_TOLERANCE
    } else {
        GRID_TIE_TOLERANCE
    }
}

/// Marginals at the checkpoints `q_grid`, which must be sample times.
pub fn project_times(curve: &SolutionCurve, q_grid: &[f64]) -> Result<Vec<Measure>> {
    q_grid
        .iter()
        .map(|&q| curve.marginal_at(q).cloned())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub k: usize,
    pub function: usize,
    pub function_id: String,
    pub checkpoint: usize,
    pub q: f64,
    pub u: f64,
    pub survivors: usize,
    pub survivor_keys: Vec<String>,
}

/// Full record of one selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub s: f64,
    pub nu: String,
    pub tie_tolerance: f64,
    pub candidates: Vec<String>,
    pub steps: Vec<SelectionStep>,
    pub selected: String,
    /// Whether the pairs ran out with several indistinguishable survivors.
    pub exhausted: bool,
}

/// Iterated maximization over the candidate set: at step `k` keep the
/// curves whose `∫f_{n_k} dμ_{q_k}` is within `tie_tol` of the maximum.
pub fn select(
    cs: &CandidateSet,
    fam: &MeasureDeterminingFamily,
    en: &Enumeration,
    tie_tol: f64,
) -> Result<(SolutionCurve, SelectionTrace)> {
    if en.functions() != fam.len() {
        return Err(Error::Enumeration(format!(
            "enumeration covers {} functions, family has {}",
            en.functions(),
            fam.len()
        )));
    }
    if !(tie_tol >= 0.0) {
        return Err(Error::Enumeration("tie tolerance must be >= 0".into()));
    }
    let curves = cs.curves();
    let mut survivors: Vec<usize> = (0..curves.len()).collect();
    let mut steps = Vec::new();
    for (k, (n, j)) in en.for_start(cs.s()).into_iter().enumerate() {
        if survivors.len() == 1 && k > 0 {
            break;
        }
        let q = en.checkpoints()[j];
        let f = fam.get(n);
        let values = survivors
            .iter()
            .map(|&i| integrate(curves[i].marginal_at(q)?, f))
            .collect::<Result<Vec<_>>>()?;
        let u = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        survivors = survivors
            .iter()
            .zip(&values)
            .filter(|(_, &g)| g >= u - tie_tol)
            .map(|(&i, _)| i)
            .collect();
        steps.push(SelectionStep {
            k,
            function: n,
            function_id: f.id().to_string(),
            checkpoint: j,
            q,
            u,
            survivors: survivors.len(),
            survivor_keys: survivors
                .iter()
                .map(|&i| curves[i].key().to_string())
                .collect(),
        });
    }
    let exhausted = survivors.len() > 1;
    if exhausted {
        for (a, &i) in survivors.iter().enumerate() {
            for &j in &survivors[a + 1..] {
                for q in en.checkpoints_from(cs.s()) {
                    let d = wasserstein1(curves[i].marginal_at(q)?, curves[j].marginal_at(q)?)?;
                    if d > tie_tol {
                        return Err(Error::NotSeparating {
                            keys: vec![curves[i].key().to_string(), curves[j].key().to_string()],
                            distance: d,
                            time: q,
                        });
                    }
                }
            }
        }
    }
    // Candidate sets are sorted by key, so the first survivor is the least.
    let chosen = &curves[survivors[0]];
    let trace = SelectionTrace {
        s: cs.s(),
        nu: cs.nu().key(),
        tie_tolerance: tie_tol,
        candidates: curves.iter().map(|c| c.key().to_string()).collect(),
        steps,
        selected: chosen.key().to_string(),
        exhausted,
    };
    Ok((chosen.clone(), trace))
}

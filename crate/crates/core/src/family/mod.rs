//! Finite candidate sets standing in for the solution set of `(s, ν)`, and
//! the surgery (glue, restrict) the selection argument relies on.

mod generate;
mod surgery;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{wasserstein1, Measure};
use crate::problem::Problem;
use crate::solver::{standard_residual_family, weak_residual_all_pairs, Provenance, SolutionCurve};

pub use generate::{generate_candidates, GenerationParams, Generator, Strategy};
pub use surgery::{glue, glue_residual_bound, restrict};

/// Default residual bound for admission.
pub const DEFAULT_ADMISSION: f64 = 1e-4;
/// Largest start mismatch `W1(μ_s, ν)` tolerated in a candidate set.
pub const START_TOLERANCE: f64 = 1e-12;

/// Why a generated curve did not enter the set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub label: String,
    pub key: String,
    pub reason: String,
}

/// A finite, nonempty set of admitted curves from one `(s, ν)`, sorted by
/// curve key.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    s: f64,
    nu: Measure,
    curves: Vec<SolutionCurve>,
    admission_tolerance: f64,
    exclusions: Vec<Exclusion>,
}

impl CandidateSet {
    /// Build from already-certified curves; checks every invariant.
    pub fn new(
        s: f64,
        nu: Measure,
        mut curves: Vec<SolutionCurve>,
        admission_tolerance: f64,
    ) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptyCandidateSet {
                s,
                reasons: "no curves supplied".into(),
            });
        }
        let times = curves[0].times().to_vec();
        for c in &curves {
            if c.times() != times.as_slice() {
                return Err(Error::InvalidCurve(format!(
                    "curve `{}` does not share the candidate time grid",
                    c.label()
                )));
            }
            if (c.s() - s).abs() > 1e-12 {
                return Err(Error::InvalidCurve(format!(
                    "curve `{}` starts at {} instead of {s}",
                    c.label(),
                    c.s()
                )));
            }
            let gap = wasserstein1(c.initial(), &nu)?;
            if gap > START_TOLERANCE {
                return Err(Error::InvalidCurve(format!(
                    "curve `{}` starts W1 {gap:e} away from the datum",
                    c.label()
                )));
            }
            match c.certificate() {
                Some(cert) if cert.value <= admission_tolerance => {}
                Some(cert) => {
                    return Err(Error::InvalidCurve(format!(
                        "curve `{}` has residual {:e} above {admission_tolerance:e}",
                        c.label(),
                        cert.value
                    )))
                }
                None => {
                    return Err(Error::InvalidCurve(format!(
                        "curve `{}` carries no residual certificate",
                        c.label()
                    )))
                }
            }
        }
        curves.sort_by(|a, b| a.key().cmp(b.key()));
        curves.dedup_by(|a, b| a.key() == b.key());
        Ok(Self {
            s,
            nu,
            curves,
            admission_tolerance,
            exclusions: Vec::new(),
        })
    }

    /// Certify `curves` against `p` with the standard residual family and
    /// build the set from those that pass; the rest are logged as exclusions.
    pub fn admit(
        p: &Problem,
        s: f64,
        nu: Measure,
        curves: Vec<SolutionCurve>,
        admission_tolerance: f64,
    ) -> Result<Self> {
        let fs = standard_residual_family(p.dim());
        let mut kept = Vec::new();
        let mut exclusions = Vec::new();
        for c in curves {
            let cert = weak_residual_all_pairs(&c, p, &fs)?;
            if cert.value <= admission_tolerance {
                kept.push(c.with_certificate(cert));
            } else {
                log::info!("excluding `{}`: residual {:e}", c.label(), cert.value);
                exclusions.push(Exclusion {
                    label: c.label().to_string(),
                    key: c.key().to_string(),
                    reason: format!("residual {:e} > {admission_tolerance:e}", cert.value),
                });
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyCandidateSet {
                s,
                reasons: reasons(&exclusions),
            });
        }
        let mut set = Self::new(s, nu, kept, admission_tolerance)?;
        set.exclusions = exclusions;
        Ok(set)
    }

    pub(crate) fn with_exclusions(mut self, mut more: Vec<Exclusion>) -> Self {
        self.exclusions.append(&mut more);
        self
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn nu(&self) -> &Measure {
        &self.nu
    }

    pub fn curves(&self) -> &[SolutionCurve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn admission_tolerance(&self) -> f64 {
        self.admission_tolerance
    }

    pub fn exclusions(&self) -> &[Exclusion] {
        &self.exclusions
    }

    pub fn times(&self) -> &[f64] {
        self.curves[0].times()
    }

    pub fn get(&self, key: &str) -> Option<&SolutionCurve> {
        self.curves.iter().find(|c| c.key() == key)
    }

    /// Nonempty subset of curves satisfying `keep`.
    pub fn subset(&self, keep: impl Fn(&SolutionCurve) -> bool) -> Result<Self> {
        let curves: Vec<_> = self.curves.iter().filter(|c| keep(c)).cloned().collect();
        if curves.is_empty() {
            return Err(Error::EmptyCandidateSet {
                s: self.s,
                reasons: "subset filter removed every curve".into(),
            });
        }
        Ok(Self {
            curves,
            ..self.clone()
        })
    }

    pub fn manifest(&self) -> CandidateManifest {
        CandidateManifest {
            s: self.s,
            nu: self.nu.key(),
            admission_tolerance: self.admission_tolerance,
            curves: self
                .curves
                .iter()
                .map(|c| CurveSummary {
                    key: c.key().to_string(),
                    label: c.label().to_string(),
                    provenance: c.provenance(),
                    residual: c.certificate().map(|r| r.value).unwrap_or(f64::NAN),
                    continuity_constant: c.continuity_constant(),
                })
                .collect(),
            exclusions: self.exclusions.clone(),
        }
    }
}

fn reasons(exclusions: &[Exclusion]) -> String {
    if exclusions.is_empty() {
        return "no strategy produced a curve".into();
    }
    exclusions
        .iter()
        .map(|e| format!("{}: {}", e.label, e.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub key: String,
    pub label: String,
    pub provenance: Provenance,
    pub residual: f64,
    pub continuity_constant: f64,
}

/// JSON form of a [`CandidateSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateManifest {
    pub s: f64,
    pub nu: String,
    pub admission_tolerance: f64,
    pub curves: Vec<CurveSummary>,
    pub exclusions: Vec<Exclusion>,
}

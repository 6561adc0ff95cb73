//! Flow-property checks on assembled tables and the two-enumeration
//! well-posedness probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{CandidateManifest, Generator};
use crate::measure::{integrate, wasserstein1, Measure};
use crate::selection::{
    default_tie_tolerance, select, Enumeration, FlowEntry, FlowTable, MeasureDeterminingFamily,
};
use crate::solver::SolutionCurve;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleCheck {
    pub s: f64,
    pub r: f64,
    pub t: f64,
    pub nu: String,
    pub distance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub tolerance: f64,
    pub checks: Vec<TripleCheck>,
    pub worst: Option<TripleCheck>,
    pub passed: bool,
}

/// Every `(s, r, t)` with `s ≤ r ≤ t` from `checkpoints`.
pub fn all_triples(checkpoints: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for (i, &s) in checkpoints.iter().enumerate() {
        for (j, &r) in checkpoints.iter().enumerate().skip(i) {
            for &t in &checkpoints[j..] {
                out.push((s, r, t));
            }
        }
    }
    out
}

/// `d = W1(μ^{s,ν}_t, μ^{r, μ^{s,ν}_r}_t)` for every table entry at `s` and
/// every triple; passes when every `d ≤ tol`.
pub fn check_flow_property(
    ft: &FlowTable,
    triples: &[(f64, f64, f64)],
    tol: f64,
) -> Result<FlowReport> {
    for &(s, r, t) in triples {
        let on_grid = [s, r, t].iter().all(|&x| ft.checkpoint_index(x).is_some());
        if !on_grid || s > r || r > t {
            return Err(Error::Enumeration(format!(
                "triple ({s}, {r}, {t}) is not an ordered checkpoint triple"
            )));
        }
    }
    let jobs: Vec<(&FlowEntry, (f64, f64, f64))> = ft
        .entries()
        .flat_map(|e| {
            let si = ft.checkpoint_index(e.s);
            triples
                .iter()
                .filter(move |tr| ft.checkpoint_index(tr.0) == si)
                .map(move |tr| (e, *tr))
        })
        .collect();
    let checks = jobs
        .par_iter()
        .map(|(e, (s, r, t))| {
            let mid = e.curve.marginal_at(*r)?;
            let restart = ft.get(*r, &mid.key()).ok_or_else(|| Error::MissingEntry {
                r: *r,
                key: mid.key(),
            })?;
            let d = wasserstein1(e.curve.marginal_at(*t)?, restart.curve.marginal_at(*t)?)?;
            Ok(TripleCheck {
                s: *s,
                r: *r,
                t: *t,
                nu: e.nu.key(),
                distance: d,
                passed: d <= tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = checks
        .iter()
        .max_by(|a, b| a.distance.total_cmp(&b.distance))
        .cloned();
    let passed = checks.iter().all(|c| c.passed);
    Ok(FlowReport {
        tolerance: tol,
        checks,
        worst,
        passed,
    })
}

/// `(γ, f̄, t̄)` with `∫f̄ dγ_t̄ > ∫f̄ dμ_t̄ + tie_tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub candidate: String,
    pub candidate_label: String,
    pub function: usize,
    pub function_id: String,
    pub checkpoint: usize,
    pub time: f64,
    pub integral_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    NotWellPosed {
        witness: Witness,
        base_selected: String,
        adversarial_selected: String,
        /// `W1(μ_t̄, β_t̄)`.
        gap: f64,
    },
    WellPosedAtScale {
        candidates: usize,
        comparisons: usize,
    },
}

impl Verdict {
    pub fn is_well_posed(&self) -> bool {
        matches!(self, Verdict::WellPosedAtScale { .. })
    }
}

/// Verdict plus the objects behind it.
#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub verdict: Verdict,
    pub base: SolutionCurve,
    pub adversarial: Option<SolutionCurve>,
    pub adversarial_enumeration: Option<Enumeration>,
    pub candidates: CandidateManifest,
    pub tie_tolerance: f64,
}

/// Select with `base`, look for a candidate beating the selection on some
/// `(f̄, t̄)`, and if one exists re-select with `(f̄, t̄)` enumerated first.
///
/// Among witnesses the largest integral gap wins; ties go to the pair met
/// first by the base enumeration, then to the least candidate key.
pub fn wellposedness_probe(
    gen: &Generator,
    s: f64,
    nu: &Measure,
    fam: &MeasureDeterminingFamily,
    base: &Enumeration,
    tie_tol: Option<f64>,
) -> Result<ProbeOutcome> {
    if !fam.closed_under_negation() {
        return Err(Error::Enumeration(
            "the probe needs a family closed under negation".into(),
        ));
    }
    let cs = gen.generate(s, nu)?;
    let tol = tie_tol.unwrap_or_else(|| default_tie_tolerance(&cs));
    let (mu, _) = select(&cs, fam, base, tol)?;
    let order = base.for_start(s);

    let mu_values = order
        .iter()
        .map(|&(n, j)| integrate(mu.marginal_at(base.checkpoints()[j])?, fam.get(n)))
        .collect::<Result<Vec<_>>>()?;
    let found: Vec<Option<(f64, usize, Witness)>> = cs
        .curves()
        .par_iter()
        .filter(|c| c.key() != mu.key())
        .map(|c| {
            let mut best: Option<(f64, usize, Witness)> = None;
            for (pos, &(n, j)) in order.iter().enumerate() {
                let t = base.checkpoints()[j];
                let gap = integrate(c.marginal_at(t)?, fam.get(n))? - mu_values[pos];
                if gap > tol && best.as_ref().map(|b| gap > b.0).unwrap_or(true) {
                    best = Some((
                        gap,
                        pos,
                        Witness {
                            candidate: c.key().to_string(),
                            candidate_label: c.label().to_string(),
                            function: n,
                            function_id: fam.get(n).id().to_string(),
                            checkpoint: j,
                            time: t,
                            integral_gap: gap,
                        },
                    ));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let witness = found
        .into_iter()
        .flatten()
        .max_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(b.1.cmp(&a.1))
                .then(b.2.candidate.cmp(&a.2.candidate))
        })
        .map(|(_, _, w)| w);

    let manifest = cs.manifest();
    match witness {
        None => Ok(ProbeOutcome {
            verdict: Verdict::WellPosedAtScale {
                candidates: cs.len(),
                comparisons: (cs.len() - 1) * order.len(),
            },
            base: mu,
            adversarial: None,
            adversarial_enumeration: None,
            candidates: manifest,
            tie_tolerance: tol,
        }),
        Some(w) => {
            let adversarial = base.with_first((w.function, w.checkpoint))?;
            let (beta, _) = select(&cs, fam, &adversarial, tol)?;
            let gap = wasserstein1(mu.marginal_at(w.time)?, beta.marginal_at(w.time)?)?;
            Ok(ProbeOutcome {
                verdict: Verdict::NotWellPosed {
                    base_selected: mu.key().to_string(),
                    adversarial_selected: beta.key().to_string(),
                    witness: w,
                    gap,
                },
                base: mu,
                adversarial: Some(beta),
                adversarial_enumeration: Some(adversarial),
                candidates: manifest,
                tie_tolerance: tol,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{GenerationParams, Strategy};
    use crate::measure::GridSpec;
    use crate::problem::preset;
    use crate::selection::assemble_flow;
    use crate::solver::{SolverSettings, TimeGrid};

    const CHECKPOINTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

    fn sqrt_generator() -> Generator {
        let mut params = GenerationParams::new(
            vec![Strategy::BranchingCatalog],
            SolverSettings {
                dt: 1e-4,
                grid: None,
                record: TimeGrid::new(1.0, 100).unwrap(),
            },
        );
        params.branch_times = vec![0.0, 0.5];
        Generator::new(preset("sqrt_branch").unwrap(), params).unwrap()
    }

    fn tanh_first(fam: &MeasureDeterminingFamily) -> Enumeration {
        let n = fam.index_of("tanh[w=1,phi=0]").unwrap();
        Enumeration::diagonal(fam.len(), CHECKPOINTS.to_vec())
            .unwrap()
            .with_first((n, 4))
            .unwrap()
    }

    #[test]
    fn triples_are_ordered() {
        let t = all_triples(&[0.0, 0.5, 1.0]);
        assert_eq!(t.len(), 10);
        assert!(t.iter().all(|(s, r, u)| s <= r && r <= u));
    }

    #[test]
    fn sqrt_flow_passes_exactly() {
        let gen = sqrt_generator();
        let fam = MeasureDeterminingFamily::default_tanh(1);
        let en = tanh_first(&fam);
        let nu = Measure::dirac(&[0.0]).unwrap();
        let table = assemble_flow(&gen, &[(0.0, nu)], &fam, &en, None).unwrap();
        let report = check_flow_property(&table, &all_triples(&CHECKPOINTS), 1e-9).unwrap();
        assert!(report.passed);
        assert_eq!(report.worst.unwrap().distance, 0.0);
        let missing = FlowTable::new(CHECKPOINTS.to_vec());
        assert!(check_flow_property(&missing, &[(0.0, 0.5, 1.0)], 1e-9)
            .unwrap()
            .checks
            .is_empty());
        assert!(check_flow_property(&table, &[(0.5, 0.25, 1.0)], 1e-9).is_err());
    }

    #[test]
    fn missing_restart_entry_is_reported() {
        let gen = sqrt_generator();
        let fam = MeasureDeterminingFamily::default_tanh(1);
        let en = tanh_first(&fam);
        let nu = Measure::dirac(&[0.0]).unwrap();
        let full = assemble_flow(&gen, &[(0.0, nu.clone())], &fam, &en, None).unwrap();
        let mut partial = FlowTable::new(CHECKPOINTS.to_vec());
        partial
            .insert(full.get(0.0, &nu.key()).unwrap().clone())
            .unwrap();
        match check_flow_property(&partial, &[(0.0, 0.5, 1.0)], 1e-9) {
            Err(Error::MissingEntry { r, .. }) => assert_eq!(r, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sqrt_probe_finds_the_stay_solution() {
        let gen = sqrt_generator();
        let fam = MeasureDeterminingFamily::default_tanh(1);
        let nu = Measure::dirac(&[0.0]).unwrap();
        let out = wellposedness_probe(&gen, 0.0, &nu, &fam, &tanh_first(&fam), None).unwrap();
        match &out.verdict {
            Verdict::NotWellPosed { witness, gap, .. } => {
                assert!(witness.function_id.starts_with("-tanh"));
                assert_eq!(witness.time, 1.0);
                // Atoms 0.25 and 0.
                assert!((gap - 0.25).abs() < 1e-10, "{gap}");
            }
            v => panic!("{v:?}"),
        }
        assert_eq!(out.adversarial.unwrap().label(), "stay");
    }

    #[test]
    fn heat_probe_is_well_posed() {
        let mut params = GenerationParams::new(
            vec![Strategy::SolverSingle, Strategy::MollificationLadder],
            SolverSettings {
                dt: 1e-3,
                grid: Some(GridSpec::centered(&[0.0], 8.0, 0.04).unwrap()),
                record: TimeGrid::new(1.0, 20).unwrap(),
            },
        );
        params.ladder = vec![1e-6];
        let gen = Generator::new(preset("heat").unwrap(), params).unwrap();
        let fam = MeasureDeterminingFamily::default_tanh(1);
        let en = Enumeration::diagonal(fam.len(), CHECKPOINTS.to_vec()).unwrap();
        let nu = Measure::dirac(&[0.0]).unwrap();
        let out = wellposedness_probe(&gen, 0.0, &nu, &fam, &en, None).unwrap();
        assert!(out.verdict.is_well_posed(), "{:?}", out.verdict);
    }
}

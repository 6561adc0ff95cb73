use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_tie_tolerance, select, Enumeration, MeasureDeterminingFamily, SelectionTrace};
use crate::error::{Error, Result};
use crate::family::{CandidateSet, Generator};
use crate::measure::Measure;
use crate::solver::SolutionCurve;

/// The selected curve for one `(s, ν)` with its provenance.
#[derive(Clone, Debug)]
pub struct FlowEntry {
    pub s: f64,
    pub nu: Measure,
    pub curve: SolutionCurve,
    pub trace: SelectionTrace,
    pub candidates: CandidateSet,
}

/// Map `(checkpoint index, measure key) → selected curve`.
#[derive(Clone, Debug)]
pub struct FlowTable {
    checkpoints: Vec<f64>,
    entries: BTreeMap<(usize, String), FlowEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowEntrySummary {
    pub s: f64,
    pub nu: String,
    pub selected: String,
    pub label: String,
    pub candidates: usize,
    pub steps: usize,
    pub exhausted: bool,
}

impl FlowTable {
    pub fn new(checkpoints: Vec<f64>) -> Self {
        Self {
            checkpoints,
            entries: BTreeMap::new(),
        }
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9
            * self
                .checkpoints
                .last()
                .map(|q| q.abs())
                .unwrap_or(1.0)
                .max(1.0);
        self.checkpoints.iter().position(|&q| (q - t).abs() <= tol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &FlowEntry> {
        self.entries.values()
    }

    pub fn get(&self, s: f64, nu_key: &str) -> Option<&FlowEntry> {
        let i = self.checkpoint_index(s)?;
        self.entries.get(&(i, nu_key.to_string()))
    }

    /// Insert an entry; its curve must start at `(s, ν)`.
    pub fn insert(&mut self, entry: FlowEntry) -> Result<()> {
        let i = self
            .checkpoint_index(entry.s)
            .ok_or(Error::OffGrid { time: entry.s })?;
        if (entry.curve.s() - entry.s).abs() > 1e-12 {
            return Err(Error::InvalidCurve(
                "flow entry curve starts at the wrong time".into(),
            ));
        }
        self.entries.insert((i, entry.nu.key()), entry);
        Ok(())
    }

    pub fn summary(&self) -> Vec<FlowEntrySummary> {
        self.entries
            .values()
            .map(|e| FlowEntrySummary {
                s: e.s,
                nu: e.nu.key(),
                selected: e.curve.key().to_string(),
                label: e.curve.label().to_string(),
                candidates: e.candidates.len(),
                steps: e.trace.steps.len(),
                exhausted: e.trace.exhausted,
            })
            .collect()
    }
}

/// Select a curve for every start and close the table under restarts: for
/// each stored curve and later checkpoint `r`, `(r, μ_r)` gets an entry too.
/// Entries of one wave are computed in parallel; the table is a sorted map,
/// so the result does not depend on scheduling.
pub fn assemble_flow(
    gen: &Generator,
    starts: &[(f64, Measure)],
    fam: &MeasureDeterminingFamily,
    en: &Enumeration,
    tie_tol: Option<f64>,
) -> Result<FlowTable> {
    let mut table = FlowTable::new(en.checkpoints().to_vec());
    let record = gen.params().solver.record;
    for q in en.checkpoints() {
        record
            .index_of(*q)
            .map_err(|_| Error::Enumeration(format!("checkpoint {q} is not on the record grid")))?;
    }
    let mut pending: BTreeMap<(usize, String), (f64, Measure)> = BTreeMap::new();
    for (s, nu) in starts {
        let i = table
            .checkpoint_index(*s)
            .ok_or_else(|| Error::Enumeration(format!("start time {s} is not a checkpoint")))?;
        let nu = gen.canonical_datum(nu)?;
        pending.insert((i, nu.key()), (en.checkpoints()[i], nu));
    }
    let mut done: BTreeSet<(usize, String)> = BTreeSet::new();
    while !pending.is_empty() {
        let wave: Vec<((usize, String), (f64, Measure))> = std::mem::take(&mut pending)
            .into_iter()
            .filter(|(k, _)| !done.contains(k))
            .collect();
        let results: Vec<FlowEntry> = wave
            .par_iter()
            .map(|((_, key), (s, nu))| {
                entry_for(gen, *s, nu, fam, en, tie_tol).map_err(|e| e.annotate(*s, key))
            })
            .collect::<Result<_>>()?;
        for ((k, _), entry) in wave.into_iter().zip(results) {
            done.insert(k);
            for (j, &r) in en.checkpoints().iter().enumerate() {
                if r <= entry.s + 1e-12 {
                    continue;
                }
                let m = entry.curve.marginal_at(r)?.clone();
                let key = (j, m.key());
                if !done.contains(&key) {
                    pending.entry(key).or_insert((r, m));
                }
            }
            table.insert(entry)?;
        }
    }
    Ok(table)
}

fn entry_for(
    gen: &Generator,
    s: f64,
    nu: &Measure,
    fam: &MeasureDeterminingFamily,
    en: &Enumeration,
    tie_tol: Option<f64>,
) -> Result<FlowEntry> {
    let cs = gen.generate(s, nu)?;
    let tol = tie_tol.unwrap_or_else(|| default_tie_tolerance(&cs));
    let (curve, trace) = select(&cs, fam, en, tol)?;
    Ok(FlowEntry {
        s,
        nu: cs.nu().clone(),
        curve,
        trace,
        candidates: cs,
    })
}

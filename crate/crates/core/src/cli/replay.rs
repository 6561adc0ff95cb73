use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::CandidateSet;
use crate::measure::read_csv;
use crate::selection::{select, Enumeration, MeasureDeterminingFamily, SelectionTrace};
use crate::solver::read_curve;

/// A selection trace with the inputs needed to re-run it. Paths are
/// relative to the bundle file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub trace: SelectionTrace,
    pub enumeration: Enumeration,
    pub dim: usize,
    pub admission_tolerance: f64,
    pub nu: String,
    pub candidates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutcome {
    pub steps: usize,
    pub diffs: Vec<String>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.diffs.is_empty()
    }
}

fn diff_traces(stored: &SelectionTrace, fresh: &SelectionTrace) -> Vec<String> {
    let mut diffs = Vec::new();
    let mut field = |name: String, a: String, b: String| {
        if a != b {
            diffs.push(format!("{name}: stored {a}, replayed {b}"));
        }
    };
    field(
        "candidates".into(),
        format!("{:?}", stored.candidates),
        format!("{:?}", fresh.candidates),
    );
    field(
        "steps".into(),
        stored.steps.len().to_string(),
        fresh.steps.len().to_string(),
    );
    for (a, b) in stored.steps.iter().zip(&fresh.steps) {
        let k = a.k;
        field(
            format!("step {k} pair"),
            format!("({}, {})", a.function, a.checkpoint),
            format!("({}, {})", b.function, b.checkpoint),
        );
        // Bit patterns: replays must agree exactly.
        if a.u.to_bits() != b.u.to_bits() {
            field(
                format!("step {k} u"),
                format!("{:e}", a.u),
                format!("{:e}", b.u),
            );
        }
        field(
            format!("step {k} survivors"),
            format!("{:?}", a.survivor_keys),
            format!("{:?}", b.survivor_keys),
        );
    }
    field(
        "selected".into(),
        stored.selected.clone(),
        fresh.selected.clone(),
    );
    field(
        "exhausted".into(),
        stored.exhausted.to_string(),
        fresh.exhausted.to_string(),
    );
    diffs
}

/// Re-run the selection recorded in a trace bundle against the stored
/// candidates. Unreadable inputs are errors; divergence is reported.
pub fn replay(path: &Path) -> Result<ReplayOutcome> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bundle: TraceBundle = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let nu = read_csv(&base.join(&bundle.nu))?;
    let curves = bundle
        .candidates
        .iter()
        .map(|rel| read_curve(&base.join(rel)))
        .collect::<Result<Vec<_>>>()?;
    let cs = CandidateSet::new(bundle.trace.s, nu, curves, bundle.admission_tolerance)?;
    let family = MeasureDeterminingFamily::default_tanh(bundle.dim);
    let (_, fresh) = select(
        &cs,
        &family,
        &bundle.enumeration,
        bundle.trace.tie_tolerance,
    )?;
    Ok(ReplayOutcome {
        steps: fresh.steps.len(),
        diffs: diff_traces(&bundle.trace, &fresh),
    })
}

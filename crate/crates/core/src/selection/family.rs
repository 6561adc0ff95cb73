use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{integrate, Measure, RidgeSpec, TestFunction};

/// Smallest integral gap that counts as separating two measures.
pub const SEPARATION_THRESHOLD: f64 = 1e-9;

/// Ordered, finite stand-in for a measure-determining sequence `{f_n}`.
#[derive(Clone, Debug)]
pub struct MeasureDeterminingFamily {
    functions: Vec<TestFunction>,
    closed_under_negation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnseparatedPair {
    pub left: String,
    pub right: String,
    pub best_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub pairs_checked: usize,
    pub unseparated: Vec<UnseparatedPair>,
}

impl SeparationReport {
    pub fn passed(&self) -> bool {
        self.unseparated.is_empty()
    }
}

fn negated_id(id: &str) -> String {
    match id.strip_prefix('-') {
        Some(rest) => rest.to_string(),
        None => format!("-{id}"),
    }
}

impl MeasureDeterminingFamily {
    /// With `closed_under_negation`, every member's negation must be present.
    pub fn new(functions: Vec<TestFunction>, closed_under_negation: bool) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Enumeration("empty test-function family".into()));
        }
        let dim = functions[0].dim();
        if let Some(f) = functions.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: f.dim(),
            });
        }
        let mut ids: Vec<&str> = functions.iter().map(TestFunction::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Enumeration("duplicate test-function ids".into()));
        }
        if closed_under_negation {
            for f in &functions {
                let want = negated_id(f.id());
                if ids.binary_search(&want.as_str()).is_err() {
                    return Err(Error::Enumeration(format!(
                        "family is not closed under negation: `{want}` missing"
                    )));
                }
            }
        }
        Ok(Self {
            functions,
            closed_under_negation,
        })
    }

    /// `tanh(ω·x + φ)` for `ω ∈ {½, 1, 2, 4}`, `φ ∈ {0, 1, −1}`, each followed
    /// by its negation. In 2D the frequencies run along both axes and the
    /// diagonal.
    pub fn default_tanh(dim: usize) -> Self {
        let dirs: Vec<Vec<f64>> = if dim == 1 {
            vec![vec![1.0]]
        } else {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![r, r]]
        };
        let mut functions = Vec::new();
        for omega in [0.5, 1.0, 2.0, 4.0] {
            for dir in &dirs {
                let w: Vec<f64> = dir.iter().map(|c| c * omega).collect();
                for phi in [0.0, 1.0, -1.0] {
                    let spec = RidgeSpec::tanh(&w, phi);
                    functions.push(TestFunction::ridge(spec.clone()));
                    functions.push(TestFunction::ridge(spec.negated()));
                }
            }
        }
        Self {
            functions,
            closed_under_negation: true,
        }
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.functions[0].dim()
    }

    pub fn get(&self, n: usize) -> &TestFunction {
        &self.functions[n]
    }

    pub fn closed_under_negation(&self) -> bool {
        self.closed_under_negation
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.id() == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.functions.iter().map(|f| f.id().to_string()).collect()
    }

    /// Check that every pair of distinct corpus measures is separated by some
    /// member by more than [`SEPARATION_THRESHOLD`].
    pub fn separation_check(&self, corpus: &[Measure]) -> Result<SeparationReport> {
        let mut values = Vec::with_capacity(corpus.len());
        for m in corpus {
            values.push(
                self.functions
                    .iter()
                    .map(|f| integrate(m, f))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let keys: Vec<String> = corpus.iter().map(Measure::key).collect();
        let mut report = SeparationReport {
            pairs_checked: 0,
            unseparated: Vec::new(),
        };
        for i in 0..corpus.len() {
            for j in i + 1..corpus.len() {
                if keys[i] == keys[j] {
                    continue;
                }
                report.pairs_checked += 1;
                let best = values[i]
                    .iter()
                    .zip(&values[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if best <= SEPARATION_THRESHOLD {
                    report.unseparated.push(UnseparatedPair {
                        left: keys[i].clone(),
                        right: keys[j].clone(),
                        best_gap: best,
                    });
                }
            }
        }
        Ok(report)
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{GenerationParams, Generator, Strategy};
use crate::measure::{DomainBox, GridSpec, Measure};
use crate::problem::{preset, Problem};
use crate::selection::{Enumeration, MeasureDeterminingFamily};
use crate::solver::{SolverSettings, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validate,
    Generate,
    Select,
    Assemble,
    FlowCheck,
    Probe,
    Particles,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Validate,
        Stage::Generate,
        Stage::Select,
        Stage::Assemble,
        Stage::FlowCheck,
        Stage::Probe,
        Stage::Particles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Generate => "generate",
            Stage::Select => "select",
            Stage::Assemble => "assemble",
            Stage::FlowCheck => "flow_check",
            Stage::Probe => "probe",
            Stage::Particles => "particles",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub workers: usize,
    pub stages: Vec<Stage>,
    pub validation_probes: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            stages: Stage::ALL.to_vec(),
            validation_probes: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub preset: String,
    pub dim: usize,
    pub horizon: f64,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            preset: "heat".into(),
            dim: 1,
            horizon: 1.0,
            a: vec![],
            b: vec![],
            box_lower: vec![-8.0],
            box_upper: vec![8.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Atoms,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub s: f64,
    pub kind: InitialKind,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            s: 0.0,
            kind: InitialKind::Atoms,
            atoms: vec![vec![0.0]],
            weights: vec![1.0],
            mean: vec![0.0],
            variance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: f64,
    pub dx: f64,
    pub record_intervals: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: 2e-4,
            dx: 0.02,
            record_intervals: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub strategies: Vec<Strategy>,
    pub admission_tolerance: f64,
    pub ladder: Vec<f64>,
    pub branch_times: Vec<f64>,
    pub mixture_weights: Vec<f64>,
    pub max_branch_combinations: usize,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::SolverSingle, Strategy::MollificationLadder],
            admission_tolerance: 1e-4,
            ladder: vec![1e-9, 1e-11, 1e-13],
            branch_times: vec![],
            mixture_weights: vec![0.5],
            max_branch_combinations: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    pub checkpoints: Vec<f64>,
    pub first: Option<String>,
    pub first_time: Option<f64>,
    pub tie_tolerance: Option<f64>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            checkpoints: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            first: None,
            first_time: None,
            tie_tolerance: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesSection {
    pub n: usize,
    pub dt: f64,
    pub windows: usize,
    pub pairs: Vec<[f64; 2]>,
    pub functions: Vec<String>,
    pub compare_to_flow: bool,
    pub w1_tolerance: f64,
    pub raw_dump: bool,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        Self {
            n: 100_000,
            dt: 0.01,
            windows: 4,
            pairs: vec![[0.0, 1.0], [0.5, 1.0]],
            functions: vec![],
            compare_to_flow: true,
            w1_tolerance: 0.02,
            raw_dump: false,
        }
    }
}

/// The whole run description. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunSection,
    pub problem: ProblemSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub generation: GenerationSection,
    pub selection: SelectionSection,
    pub flow: FlowSection,
    pub particles: ParticlesSection,
}

/// Annotated defaults, printed by `--print-schema`. Parses to
/// `Config::default()`.
pub const SCHEMA: &str = r#"# fpkflow run configuration. Every key is optional; values shown are defaults.

[run]
seed = 0                  # particle RNG seed (overridden by --seed)
workers = 0               # worker threads; 0 = one per core
# Stages to execute, in pipeline order. flow_check needs assemble;
# select needs generate; particles with compare_to_flow needs select.
stages = ["validate", "generate", "select", "assemble", "flow_check", "probe", "particles"]
validation_probes = 41    # probe points per axis and in time for coefficient checks

[problem]
preset = "heat"           # heat | zero | sqrt_branch | ou_tanh | custom
# The keys below are read only when preset = "custom".
dim = 1                   # 1 or 2
horizon = 1.0
a = []                    # dim 1: ["a"]; dim 2: ["a11", "a12", "a22"]; expressions in t, x (x, y in 2D)
b = []                    # one expression per axis
box_lower = [-8.0]
box_upper = [8.0]

[initial]
s = 0.0                   # start time; must be a checkpoint
kind = "atoms"            # atoms | gaussian
atoms = [[0.0]]           # atom locations (kind = "atoms")
weights = [1.0]
mean = [0.0]              # kind = "gaussian", discretized on the solver grid
variance = 0.1

[solver]
dt = 0.0002               # must divide the record spacing
dx = 0.02                 # grid spacing; the grid covers the problem box
record_intervals = 100    # marginals are stored at horizon / record_intervals spacing

[generation]
# solver_single | branching_catalog | mollification_ladder | mixture_hull
strategies = ["solver_single", "mollification_ladder"]
admission_tolerance = 0.0001
ladder = [1e-9, 1e-11, 1e-13]
branch_times = []         # departure times for branching_catalog (on the record grid)
mixture_weights = [0.5]   # each in (0, 1)
max_branch_combinations = 4096

[selection]
checkpoints = [0.0, 0.25, 0.5, 0.75, 1.0]   # on the record grid
# first = "tanh[w=1,phi=0]"   # move (function, first_time) to the front of the enumeration
# first_time = 1.0            # defaults to the last checkpoint
# tie_tolerance = 1e-9        # defaults: 1e-9 for atomic data, 1e-6 for grid data

[flow]
# tolerance = 1e-9            # defaults: 1e-9 for atomic data, 2 x admission_tolerance otherwise

[particles]
n = 100000
dt = 0.01                 # must divide [s, horizon]
windows = 4               # quantile bins for the martingale test
pairs = [[0.0, 1.0], [0.5, 1.0]]
functions = []            # ids from the selection family; empty = tanh along each axis
compare_to_flow = true    # require W1 <= w1_tolerance against the selected curve
w1_tolerance = 0.02
raw_dump = false          # write particles/paths.bin
"#;

fn config_error(key: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("key `{key}`: {message}"))
}

/// Parse TOML text; errors carry line and key.
pub fn parse_config(text: &str, origin: &Path) -> Result<Config> {
    let cfg: Config = toml::from_str(text).map_err(|e| {
        Error::Config(format!(
            "{}: {}",
            origin.display(),
            e.to_string().trim_end()
        ))
    })?;
    let positive = [
        ("problem.horizon", cfg.problem.horizon),
        ("solver.dt", cfg.solver.dt),
        ("solver.dx", cfg.solver.dx),
        (
            "generation.admission_tolerance",
            cfg.generation.admission_tolerance,
        ),
        ("particles.dt", cfg.particles.dt),
        ("particles.w1_tolerance", cfg.particles.w1_tolerance),
    ];
    for (key, v) in positive {
        if !v.is_finite() || v <= 0.0 {
            return Err(config_error(key, format!("must be positive, got {v}")));
        }
    }
    for (key, v) in [
        ("flow.tolerance", cfg.flow.tolerance),
        ("selection.tie_tolerance", cfg.selection.tie_tolerance),
    ] {
        if v.is_some_and(|v| !v.is_finite() || v < 0.0) {
            return Err(config_error(key, "must be non-negative"));
        }
    }
    if cfg.particles.n == 0 || cfg.particles.windows == 0 {
        return Err(config_error("particles", "n and windows must be positive"));
    }
    if cfg.run.stages.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_error(
            "run.stages",
            "stages must be distinct and in pipeline order",
        ));
    }
    let has = |s: Stage| cfg.run.stages.contains(&s);
    if has(Stage::Select) && !has(Stage::Generate) {
        return Err(config_error("run.stages", "select needs generate"));
    }
    if has(Stage::FlowCheck) && !has(Stage::Assemble) {
        return Err(config_error("run.stages", "flow_check needs assemble"));
    }
    if has(Stage::Particles) && cfg.particles.compare_to_flow && !has(Stage::Select) {
        return Err(config_error(
            "particles.compare_to_flow",
            "comparison needs the select stage",
        ));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Everything the pipeline needs, built from a config.
pub struct Setup {
    pub problem: Problem,
    pub generator: Generator,
    pub s: f64,
    pub nu: Measure,
    pub family: MeasureDeterminingFamily,
    pub enumeration: Enumeration,
}

impl Config {
    pub fn problem(&self) -> Result<Problem> {
        let p = &self.problem;
        if p.preset != "custom" {
            return preset(&p.preset).map_err(|e| config_error("problem.preset", e));
        }
        let domain = DomainBox::new(p.box_lower.clone(), p.box_upper.clone())
            .map_err(|e| config_error("problem.box_lower", e))?;
        Problem::custom(p.dim, p.horizon, &p.a, &p.b, domain)
            .map_err(|e| config_error("problem.a", e))
    }

    fn grid(&self, p: &Problem) -> Result<GridSpec> {
        let b = &p.domain_box;
        let center: Vec<f64> = (0..p.dim())
            .map(|i| 0.5 * (b.lower[i] + b.upper[i]))
            .collect();
        let half = (0..p.dim())
            .map(|i| 0.5 * (b.upper[i] - b.lower[i]))
            .fold(0.0, f64::max);
        GridSpec::centered(&center, half, self.solver.dx).map_err(|e| config_error("solver.dx", e))
    }

    /// Test functions for the martingale check.
    pub fn particle_functions(&self, dim: usize) -> Vec<String> {
        if !self.particles.functions.is_empty() {
            return self.particles.functions.clone();
        }
        match dim {
            1 => vec!["tanh[w=1,phi=0]".into()],
            _ => vec!["tanh[w=(1,0),phi=0]".into(), "tanh[w=(0,1),phi=0]".into()],
        }
    }

    pub fn setup(&self) -> Result<Setup> {
        let problem = self.problem()?;
        let dim = problem.dim();
        let init = &self.initial;
        let nu = match init.kind {
            InitialKind::Atoms => Measure::atoms(dim, init.atoms.clone(), init.weights.clone())
                .map_err(|e| config_error("initial.atoms", e))?,
            InitialKind::Gaussian => {
                if init.mean.len() != dim {
                    return Err(config_error("initial.mean", format!("needs {dim} entries")));
                }
                Measure::gaussian(self.grid(&problem)?, &init.mean, init.variance)
                    .map_err(|e| config_error("initial.variance", e))?
            }
        };
        let grid = if problem.coefficients.is_degenerate() && nu.is_atomic() {
            None
        } else {
            Some(self.grid(&problem)?)
        };
        let record = TimeGrid::new(problem.horizon(), self.solver.record_intervals)
            .map_err(|e| config_error("solver.record_intervals", e))?;
        let g = &self.generation;
        let mut params = GenerationParams::new(
            g.strategies.clone(),
            SolverSettings {
                dt: self.solver.dt,
                grid,
                record,
            },
        );
        params.admission_tolerance = g.admission_tolerance;
        params.ladder = g.ladder.clone();
        params.branch_times = g.branch_times.clone();
        params.mixture_weights = g.mixture_weights.clone();
        params.max_branch_combinations = g.max_branch_combinations;
        let generator =
            Generator::new(problem.clone(), params).map_err(|e| config_error("generation", e))?;

        let family = MeasureDeterminingFamily::default_tanh(dim);
        let sel = &self.selection;
        let mut enumeration = Enumeration::diagonal(family.len(), sel.checkpoints.clone())
            .map_err(|e| config_error("selection.checkpoints", e))?;
        if enumeration.checkpoint_index(init.s).is_none() {
            return Err(config_error("initial.s", "start time must be a checkpoint"));
        }
        if let Some(id) = &sel.first {
            let n = family.index_of(id).ok_or_else(|| {
                config_error("selection.first", format!("unknown function id `{id}`"))
            })?;
            let t = sel.first_time.unwrap_or(*sel.checkpoints.last().unwrap());
            let j = enumeration
                .checkpoint_index(t)
                .ok_or_else(|| config_error("selection.first_time", "not a checkpoint"))?;
            enumeration = enumeration.with_first((n, j))?;
        }
        if let Some(tol) = sel.tie_tolerance {
            if !(tol >= 0.0) {
                return Err(config_error("selection.tie_tolerance", "must be >= 0"));
            }
        }
        for id in self.particle_functions(dim) {
            if family.index_of(&id).is_none() {
                return Err(config_error(
                    "particles.functions",
                    format!("unknown function id `{id}`"),
                ));
            }
        }
        Ok(Setup {
            s: init.s,
            nu: generator.canonical_datum(&nu)?,
            problem,
            generator,
            family,
            enumeration,
        })
    }
}

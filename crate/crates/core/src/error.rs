use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("total mass {0} is not positive")]
    NonPositiveMass(f64),

    #[error("test function `{id}` is not finite at {point:?}")]
    Evaluation { id: String, point: Vec<f64> },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("unknown preset `{name}`; valid presets are {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },

    #[error("time step {dt} violates the stability bound; the largest stable step is {stable_dt}")]
    Stability { dt: f64, stable_dt: f64 },

    #[error("mass drifted by {drift:e} at t = {time}")]
    MassDrift { drift: f64, time: f64 },

    #[error("boundary mass {mass:e} at t = {time} exceeds 1e-6; enlarge the domain box")]
    BoundaryMass { mass: f64, time: f64 },

    #[error("time {time} is not on the time grid")]
    OffGrid { time: f64 },

    #[error("invalid time pair ({t1}, {t2}) for a curve on [{s}, {horizon}]")]
    TimePair {
        t1: f64,
        t2: f64,
        s: f64,
        horizon: f64,
    },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("glue endpoint mismatch at r = {r}: W1 gap {gap}")]
    GlueMismatch { r: f64, gap: f64 },

    #[error("no admissible candidate at s = {s}: {reasons}")]
    EmptyCandidateSet { s: f64, reasons: String },

    #[error("invalid generation request: {0}")]
    Generation(String),

    #[error("invalid enumeration: {0}")]
    Enumeration(String),

    #[error("family not separating at this tolerance: survivors {keys:?} differ by W1 {distance:e} at t = {time}")]
    NotSeparating {
        keys: Vec<String>,
        distance: f64,
        time: f64,
    },

    #[error("missing flow table entry at r = {r} for measure {key}")]
    MissingEntry { r: f64, key: String },

    #[error("selection at (s = {s}, nu = {key}) failed: {source}")]
    Annotated {
        s: f64,
        key: String,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("unregistered derivatives for test function `{0}`")]
    MissingDerivatives(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn annotate(self, s: f64, key: &str) -> Self {
        Error::Annotated {
            s,
            key: key.to_string(),
            source: Box::new(self),
        }
    }
}

//! Config-driven experiment runner and trace replay.

mod config;
mod pipeline;
mod replay;

pub use config::{
    load_config, parse_config, Config, FlowSection, GenerationSection, InitialKind, InitialSection,
    ParticlesSection, ProblemSection, RunSection, SelectionSection, Setup, SolverSection, Stage,
    SCHEMA,
};
pub use pipeline::{
    run, ParticleReport, Report, RunOptions, RunOutcome, SelectionSummary, StageStatus, W1Row,
};
pub use replay::{replay, ReplayOutcome, TraceBundle};

use crate::error::Error;

/// Process exit code for an error: 2 for unusable input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::UnknownPreset { .. } => {
            2
        }
        _ => 1,
    }
}

//! Iterated-maximization selection over candidate sets and assembly of
//! flows closed under restart.

mod enumeration;
mod family;
mod flow;
mod select;

pub use enumeration::{Enumeration, Pair};
pub use family::{
    MeasureDeterminingFamily, SeparationReport, UnseparatedPair, SEPARATION_THRESHOLD,
};
pub use flow::{assemble_flow, FlowEntry, FlowEntrySummary, FlowTable};
pub use select::{
    default_tie_tolerance, project_times, select, SelectionStep, SelectionTrace,
    ATOMIC_TIE_TOLERANCE, GRID_TIE_TOLERANCE,
};

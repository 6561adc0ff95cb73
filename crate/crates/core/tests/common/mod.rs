#![allow(dead_code)]

mod oracle;

#[allow(unused_imports)]
pub use oracle::selection_oracle;

use std::path::PathBuf;

use fpk_flow::cli::{load_config, Config, Setup};
use fpk_flow::measure::{GridSpec, Measure};
use fpk_flow::problem::preset;
use fpk_flow::solver::{solve_forward, SolutionCurve, SolverSettings, TimeGrid};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.cfg"))
}

pub fn bundled(name: &str) -> Config {
    load_config(&config_path(name)).unwrap()
}

pub fn setup(name: &str) -> Setup {
    bundled(name).setup().unwrap()
}

/// Flow tolerance used by the runner: exact for atoms, 2× admission otherwise.
pub fn flow_tolerance(cfg: &Config, setup: &Setup) -> f64 {
    if setup.nu.is_atomic() {
        1e-9
    } else {
        2.0 * cfg.generation.admission_tolerance
    }
}

/// Heat from δ_0 on `[-8, 8]`.
pub fn heat_solution(dx: f64, dt: f64, intervals: usize) -> SolutionCurve {
    let settings = SolverSettings {
        dt,
        grid: Some(GridSpec::centered(&[0.0], 8.0, dx).unwrap()),
        record: TimeGrid::new(1.0, intervals).unwrap(),
    };
    solve_forward(
        &preset("heat").unwrap(),
        0.0,
        &Measure::dirac(&[0.0]).unwrap(),
        &settings,
    )
    .unwrap()
}

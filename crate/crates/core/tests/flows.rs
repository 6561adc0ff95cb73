//! Assembled flows on the bundled presets satisfy the flow property on
//! every checkpoint triple.

mod common;

use fpk_flow::cli::parse_config;
use fpk_flow::selection::assemble_flow;
use fpk_flow::verify::{all_triples, check_flow_property};
use std::path::Path;

fn check(name: &str) {
    let cfg = common::bundled(name);
    let setup = cfg.setup().unwrap();
    let table = assemble_flow(
        &setup.generator,
        &[(setup.s, setup.nu.clone())],
        &setup.family,
        &setup.enumeration,
        None,
    )
    .unwrap();
    let triples = all_triples(table.checkpoints());
    assert_eq!(triples.len(), 35);
    let tol = common::flow_tolerance(&cfg, &setup);
    let report = check_flow_property(&table, &triples, tol).unwrap();
    assert!(report.passed, "{name}: {:?}", report.worst);
    // Every entry at s was checked against every triple starting there.
    let at_start = table.entries().filter(|e| e.s == setup.s).count();
    assert!(report.checks.len() >= at_start * 15);
}

#[test]
fn zero_flow() {
    check("zero");
}

#[test]
fn heat_flow() {
    check("heat");
}

#[test]
fn ou_tanh_flow() {
    check("ou_tanh");
}

#[test]
fn sqrt_branch_flow_is_exact() {
    check("sqrt_branch");
}

#[test]
fn two_dimensional_heat_flow() {
    let text = r#"
[problem]
preset = "custom"
dim = 2
a = ["1", "0", "1"]
b = ["0", "0"]
box_lower = [-6.0, -6.0]
box_upper = [6.0, 6.0]

[initial]
atoms = [[0.075, 0.075]]

[solver]
dt = 0.005
dx = 0.15
record_intervals = 20

[generation]
strategies = ["solver_single"]
admission_tolerance = 1e-3
"#;
    let cfg = parse_config(text, Path::new("heat2d")).unwrap();
    let setup = cfg.setup().unwrap();
    let table = assemble_flow(
        &setup.generator,
        &[(0.0, setup.nu.clone())],
        &setup.family,
        &setup.enumeration,
        None,
    )
    .unwrap();
    // Sliced W1 in 2D; tolerance widened by the same factor 2.
    let report = check_flow_property(&table, &all_triples(table.checkpoints()), 2e-3).unwrap();
    assert!(report.passed, "{:?}", report.worst);
}

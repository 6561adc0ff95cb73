//! Several admitted solutions from the same datum for the square-root drift.

mod common;

use std::time::Instant;

use fpk_flow::measure::{wasserstein1, Measure};
use fpk_flow::solver::{standard_residual_family, weak_residual_all_pairs};

#[test]
fn sqrt_branch_has_three_separated_solutions() {
    let clock = Instant::now();
    let s = common::setup("sqrt_branch");
    assert_eq!(s.generator.params().solver.dt, 1e-4);
    let cs = s
        .generator
        .generate(0.0, &Measure::dirac(&[0.0]).unwrap())
        .unwrap();
    assert!(cs.len() >= 3);
    let fs = standard_residual_family(1);
    for c in cs.curves() {
        let r = weak_residual_all_pairs(c, s.generator.problem(), &fs)
            .unwrap()
            .value;
        assert!(r <= 1e-5, "{}: {r}", c.label());
    }
    // Terminal atoms: 1/4 (leave at 0), 1/16 (leave at 1/2), 0 (stay).
    let mut ends: Vec<f64> = cs
        .curves()
        .iter()
        .map(|c| c.terminal().location(0)[0])
        .collect();
    ends.sort_by(f64::total_cmp);
    for (got, want) in ends.iter().zip([0.0, 0.0625, 0.25]) {
        assert!((got - want).abs() < 1e-10);
    }
    for (i, a) in cs.curves().iter().enumerate() {
        for b in &cs.curves()[i + 1..] {
            assert!(wasserstein1(a.terminal(), b.terminal()).unwrap() >= 0.05);
        }
    }
    assert!(clock.elapsed().as_secs_f64() <= 10.0);
}

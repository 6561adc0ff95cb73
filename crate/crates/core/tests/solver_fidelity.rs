//! Grid scheme accuracy on the heat equation.

mod common;

use fpk_flow::measure::{GridSpec, Measure};
use fpk_flow::problem::preset;
use fpk_flow::solver::{
    solve_forward, standard_residual_family, weak_residual_all_pairs, SolverSettings, TimeGrid,
};

#[test]
fn heat_second_moment_at_one() {
    let curve = common::heat_solution(0.01, 1e-4, 4);
    // d/dt ∫x² dμ = ∫ L x² dμ = a = 1, from the deposited datum.
    let expected = curve.initial().second_moment() + 1.0;
    let m2 = curve.terminal().second_moment();
    assert!((m2 - 1.0).abs() <= 0.02, "{m2}");
    assert!((m2 - expected).abs() <= 0.02 * expected);
}

#[test]
fn residual_shrinks_under_joint_refinement() {
    // dt = Δx/100 and the record grid refined with dt (five steps per
    // sample), so the quadrature in time keeps pace with the scheme.
    let p = preset("heat").unwrap();
    let fs = standard_residual_family(1);
    let levels = [
        (0.16, 1.6e-3, 125),
        (0.08, 8e-4, 250),
        (0.04, 4e-4, 500),
        (0.02, 2e-4, 1000),
    ];
    let residuals: Vec<f64> = levels
        .iter()
        .map(|&(dx, dt, intervals)| {
            let settings = SolverSettings {
                dt,
                grid: Some(GridSpec::centered(&[0.0], 8.0, dx).unwrap()),
                record: TimeGrid::new(1.0, intervals).unwrap(),
            };
            let c = solve_forward(&p, 0.0, &Measure::dirac(&[0.0]).unwrap(), &settings).unwrap();
            weak_residual_all_pairs(&c, &p, &fs).unwrap().value
        })
        .collect();
    for w in residuals.windows(2) {
        assert!(w[0] / w[1] >= 1.3, "{residuals:?}");
    }
}

//! The two-enumeration probe on ill-posed and well-posed presets.

mod common;

use fpk_flow::measure::wasserstein1;
use fpk_flow::selection::assemble_flow;
use fpk_flow::verify::{all_triples, check_flow_property, wellposedness_probe, Verdict};

#[test]
fn sqrt_branch_is_not_well_posed() {
    let s = common::setup("sqrt_branch");
    let out =
        wellposedness_probe(&s.generator, 0.0, &s.nu, &s.family, &s.enumeration, None).unwrap();
    let (witness, gap) = match &out.verdict {
        Verdict::NotWellPosed { witness, gap, .. } => (witness.clone(), *gap),
        v => panic!("{v:?}"),
    };
    // Selected parabola x = t²/4 against the resting solution at t = 1.
    assert_eq!(witness.time, 1.0);
    assert!(witness.function_id.starts_with("-tanh"));
    assert!(gap >= 0.1);
    assert!((gap - 0.25).abs() < 1e-9, "{gap}");
    let beta = out.adversarial.as_ref().unwrap();
    let d = wasserstein1(
        out.base.marginal_at(1.0).unwrap(),
        beta.marginal_at(1.0).unwrap(),
    )
    .unwrap();
    assert_eq!(d, gap);
    assert_eq!(beta.label(), "stay");

    // Both enumerations give flows that pass the exact flow check.
    let adversarial = out.adversarial_enumeration.unwrap();
    for en in [&s.enumeration, &adversarial] {
        let table =
            assemble_flow(&s.generator, &[(0.0, s.nu.clone())], &s.family, en, None).unwrap();
        let report = check_flow_property(&table, &all_triples(table.checkpoints()), 1e-9).unwrap();
        assert!(report.passed, "{:?}", report.worst);
    }
}

#[test]
fn heat_and_ou_tanh_are_well_posed_at_scale() {
    for name in ["heat", "ou_tanh"] {
        let s = common::setup(name);
        let out =
            wellposedness_probe(&s.generator, 0.0, &s.nu, &s.family, &s.enumeration, None).unwrap();
        assert!(out.verdict.is_well_posed(), "{name}: {:?}", out.verdict);
        // Every ladder candidate collapsed onto the solver curve.
        assert_eq!(out.candidates.curves.len(), 1, "{name}");
        assert!(out
            .candidates
            .exclusions
            .iter()
            .all(|e| e.reason.starts_with("duplicate")));
    }
}

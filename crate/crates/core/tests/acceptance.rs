//! One PASS/FAIL line per acceptance criterion, each with its time budget.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use fpk_flow::family::{glue, restrict};
use fpk_flow::measure::{wasserstein1, GridSpec, Measure, RidgeSpec, TestFunction};
use fpk_flow::particles::{marginals, martingale_residual, simulate_particles};
use fpk_flow::problem::preset;
use fpk_flow::selection::assemble_flow;
use fpk_flow::solver::{
    solve_forward, standard_residual_family, weak_residual_all_pairs, SolverSettings, TimeGrid,
};
use fpk_flow::verify::{all_triples, check_flow_property, wellposedness_probe, Verdict};

fn nonuniqueness() -> String {
    let s = common::setup("sqrt_branch");
    assert_eq!(s.generator.params().solver.dt, 1e-4);
    let cs = s
        .generator
        .generate(0.0, &Measure::dirac(&[0.0]).unwrap())
        .unwrap();
    assert!(cs.len() >= 3, "{} candidates", cs.len());
    let fs = standard_residual_family(1);
    let mut worst = 0.0f64;
    for c in cs.curves() {
        worst = worst.max(
            weak_residual_all_pairs(c, s.generator.problem(), &fs)
                .unwrap()
                .value,
        );
    }
    assert!(worst <= 1e-5, "residual {worst}");
    let mut gap = f64::INFINITY;
    for (i, a) in cs.curves().iter().enumerate() {
        for b in &cs.curves()[i + 1..] {
            gap = gap.min(wasserstein1(a.terminal(), b.terminal()).unwrap());
        }
    }
    assert!(gap >= 0.05, "min pairwise W1 {gap}");
    format!(
        "{} candidates, residual ≤ {worst:.1e}, min W1 at t=1 {gap:.4}",
        cs.len()
    )
}

fn selection_oracle() -> String {
    let multi = common::selection_oracle(20, 50);
    format!("50 cases agree, {multi} multi-step")
}

fn flows() -> String {
    let mut worst = Vec::new();
    for name in ["zero", "heat", "ou_tanh", "sqrt_branch"] {
        let cfg = common::bundled(name);
        let s = cfg.setup().unwrap();
        let table = assemble_flow(
            &s.generator,
            &[(s.s, s.nu.clone())],
            &s.family,
            &s.enumeration,
            None,
        )
        .unwrap();
        let tol = common::flow_tolerance(&cfg, &s);
        let report = check_flow_property(&table, &all_triples(table.checkpoints()), tol).unwrap();
        assert!(report.passed, "{name}: {:?}", report.worst);
        let w = report.worst.as_ref().map_or(0.0, |c| c.distance);
        worst.push(format!("{name} {w:.1e}/{tol:.0e}"));
    }
    worst.join(", ")
}

fn probe() -> String {
    let s = common::setup("sqrt_branch");
    let out =
        wellposedness_probe(&s.generator, 0.0, &s.nu, &s.family, &s.enumeration, None).unwrap();
    let Verdict::NotWellPosed { witness, gap, .. } = &out.verdict else {
        panic!("sqrt_branch: {:?}", out.verdict);
    };
    assert!(*gap >= 0.1, "gap {gap}");
    let adversarial = out.adversarial_enumeration.clone().unwrap();
    for en in [&s.enumeration, &adversarial] {
        let table =
            assemble_flow(&s.generator, &[(0.0, s.nu.clone())], &s.family, en, None).unwrap();
        let report = check_flow_property(&table, &all_triples(table.checkpoints()), 1e-9).unwrap();
        assert!(report.passed, "{:?}", report.worst);
    }
    for name in ["heat", "ou_tanh"] {
        let s = common::setup(name);
        let out =
            wellposedness_probe(&s.generator, 0.0, &s.nu, &s.family, &s.enumeration, None).unwrap();
        assert!(out.verdict.is_well_posed(), "{name}: {:?}", out.verdict);
    }
    format!(
        "sqrt_branch not well-posed (witness {} at t={}, W1 {gap:.4}); heat, ou_tanh well-posed at scale",
        witness.function_id, witness.time
    )
}

fn fidelity() -> String {
    let m2 = common::heat_solution(0.01, 1e-4, 4)
        .terminal()
        .second_moment();
    assert!((m2 - 1.0).abs() <= 0.02, "m2 {m2}");
    let p = preset("heat").unwrap();
    let fs = standard_residual_family(1);
    let levels = [
        (0.16, 1.6e-3, 125),
        (0.08, 8e-4, 250),
        (0.04, 4e-4, 500),
        (0.02, 2e-4, 1000),
    ];
    let res: Vec<f64> = levels
        .iter()
        .map(|&(dx, dt, n)| {
            let settings = SolverSettings {
                dt,
                grid: Some(GridSpec::centered(&[0.0], 8.0, dx).unwrap()),
                record: TimeGrid::new(1.0, n).unwrap(),
            };
            let c = solve_forward(&p, 0.0, &Measure::dirac(&[0.0]).unwrap(), &settings).unwrap();
            weak_residual_all_pairs(&c, &p, &fs).unwrap().value
        })
        .collect();
    let ratios: Vec<String> = res
        .windows(2)
        .map(|w| format!("{:.2}", w[0] / w[1]))
        .collect();
    assert!(res.windows(2).all(|w| w[0] / w[1] >= 1.3), "{res:?}");
    format!("m2(1) = {m2:.4}, residual ratios {}", ratios.join(", "))
}

fn particles() -> String {
    const N: usize = 100_000;
    let checkpoints = [0.25, 0.5, 0.75, 1.0];
    let tanh = TestFunction::ridge(RidgeSpec::tanh(&[1.0], 0.0));
    let pairs = [(0.0, 1.0), (0.5, 1.0)];
    let mut notes = Vec::new();
    for (name, x0) in [("heat", 0.0), ("ou_tanh", 1.0)] {
        let p = preset(name).unwrap();
        let nu = Measure::dirac(&[x0]).unwrap();
        let e = simulate_particles(&p, 0.0, &nu, N, 0.01, 9).unwrap();
        let settings = SolverSettings {
            dt: 2e-4,
            grid: Some(GridSpec::centered(&[0.0], 8.0, 0.02).unwrap()),
            record: TimeGrid::new(1.0, 4).unwrap(),
        };
        let solver = solve_forward(&p, 0.0, &nu, &settings).unwrap();
        let pm = marginals(&e, &checkpoints).unwrap();
        let w = checkpoints
            .iter()
            .map(|&t| {
                wasserstein1(pm.marginal_at(t).unwrap(), solver.marginal_at(t).unwrap()).unwrap()
            })
            .fold(0.0, f64::max);
        assert!(w <= 0.02, "{name}: W1 {w}");
        let r = martingale_residual(&e, &p, std::slice::from_ref(&tanh), &pairs, 4).unwrap();
        assert!(r.passed(), "{name}: {r:?}");
        notes.push(format!(
            "{name} W1 {w:.4}, M {:.4}/{:.4}",
            r.statistic, r.threshold
        ));
    }
    let p = preset("ou_tanh").unwrap();
    let b = p.clone();
    let doubled = p.with_drift(
        move |t, x| {
            let v = b.drift(t, x);
            [2.0 * v[0], 2.0 * v[1]]
        },
        2.0,
        "doubled",
    );
    let e =
        simulate_particles(&doubled, 0.0, &Measure::dirac(&[1.0]).unwrap(), N, 0.01, 13).unwrap();
    let r = martingale_residual(&e, &p, &[tanh], &pairs, 4).unwrap();
    assert!(!r.passed(), "{r:?}");
    notes.push(format!(
        "doubled drift M {:.4} > {:.4}",
        r.statistic, r.threshold
    ));
    notes.join("; ")
}

fn surgery() -> String {
    let s = common::setup("sqrt_branch");
    let nu = Measure::dirac(&[0.0]).unwrap();
    let cs = s.generator.generate(0.0, &nu).unwrap();
    let mut identities = 0;
    for c in cs.curves() {
        for r in [0.0, 0.25, 0.5, 0.73, 1.0] {
            assert_eq!(
                &glue(&c.head(r).unwrap(), &restrict(c, r).unwrap()).unwrap(),
                c
            );
            // An earlier cut on the 0.01 record grid.
            let q = (r * 50.0).floor() / 100.0;
            let twice = restrict(&restrict(c, q).unwrap(), r).unwrap();
            assert_eq!(twice, restrict(c, r).unwrap());
            identities += 2;
        }
    }
    let stay = cs.curves().iter().find(|c| c.label() == "stay").unwrap();
    let fs = standard_residual_family(1);
    let mut worst = 0.0f64;
    for back in s.generator.generate(0.5, &nu).unwrap().curves() {
        let glued = glue(&stay.head(0.5).unwrap(), back).unwrap();
        worst = worst.max(
            weak_residual_all_pairs(&glued, s.generator.problem(), &fs)
                .unwrap()
                .value,
        );
    }
    assert!(worst <= cs.admission_tolerance(), "glued residual {worst}");
    format!("{identities} identities bit-exact, glued residual ≤ {worst:.1e}")
}

fn determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    for name in ["heat", "sqrt_branch"] {
        let cfg = common::config_path(name);
        let mut reports = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{name}{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_fpkflow"))
                .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .output()
                .unwrap()
                .status;
            assert!(status.success(), "{name}: {status}");
            reports.push(std::fs::read(out.join("report.json")).unwrap());
        }
        assert!(reports[0] == reports[1], "{name}: reports differ");
    }
    "heat and sqrt_branch reports byte-identical across runs".into()
}

type Criterion = (&'static str, f64, fn() -> String);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("non-uniqueness", 10.0, nonuniqueness),
        ("selection oracle", 5.0, selection_oracle),
        ("flow property", 60.0, flows),
        ("well-posedness probe", 60.0, probe),
        ("solver fidelity", 120.0, fidelity),
        ("particle consistency", 120.0, particles),
        ("surgery invariants", 5.0, surgery),
        ("determinism", 120.0, determinism),
    ];
    let mut failed = 0;
    for (n, (name, budget, f)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f));
        let secs = clock.elapsed().as_secs_f64();
        let line = match result {
            Ok(detail) if secs <= *budget => format!("PASS {name} ({secs:.2}s): {detail}"),
            Ok(detail) => format!("FAIL {name} ({secs:.2}s > {budget}s): {detail}"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL {name} ({secs:.2}s): {msg}")
            }
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("criterion {}: {line}", n + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

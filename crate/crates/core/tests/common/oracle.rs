//! Iterated maximization against exhaustive lexicographic maximization on
//! random candidate sets.

use fpk_flow::family::CandidateSet;
use fpk_flow::measure::{integrate, Measure};
use fpk_flow::selection::{select, Enumeration, MeasureDeterminingFamily};
use fpk_flow::solver::{Provenance, ResidualCertificate, SolutionCurve};
use fpk_flow::Error;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIMES: [f64; 3] = [0.0, 0.5, 1.0];
const LATTICE: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

fn certified(c: SolutionCurve) -> SolutionCurve {
    c.with_certificate(ResidualCertificate {
        value: 0.0,
        functions: vec![],
        times: 3,
        worst_function: String::new(),
        worst_pair: (0.0, 0.0),
    })
}

/// Small lattice measures so that exact ties are common.
fn random_measure(rng: &mut ChaCha8Rng) -> Measure {
    if rng.random_bool(0.5) {
        Measure::dirac(&[LATTICE[rng.random_range(0..5)]]).unwrap()
    } else {
        let a = LATTICE[rng.random_range(0..5)];
        let b = LATTICE[rng.random_range(0..5)];
        Measure::atoms(1, vec![vec![a], vec![b]], vec![0.5, 0.5]).unwrap()
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> (CandidateSet, MeasureDeterminingFamily, Enumeration) {
    let nu = Measure::dirac(&[0.0]).unwrap();
    let size = rng.random_range(1..=6);
    let curves = (0..size)
        .map(|i| {
            let ms = vec![nu.clone(), random_measure(rng), random_measure(rng)];
            certified(
                SolutionCurve::new(TIMES.to_vec(), ms, Provenance::Solver, format!("c{i}"))
                    .unwrap(),
            )
        })
        .collect();
    let cs = CandidateSet::new(0.0, nu, curves, 1e-4).unwrap();

    let all = MeasureDeterminingFamily::default_tanh(1);
    let mut picks: Vec<usize> = (0..all.len()).collect();
    picks.shuffle(rng);
    picks.truncate(rng.random_range(1..=4));
    picks.sort_unstable();
    let fam =
        MeasureDeterminingFamily::new(picks.iter().map(|&n| all.get(n).clone()).collect(), false)
            .unwrap();

    let mut order: Vec<(usize, usize)> = (0..fam.len())
        .flat_map(|n| (0..TIMES.len()).map(move |j| (n, j)))
        .collect();
    order.shuffle(rng);
    let en = Enumeration::from_order(fam.len(), TIMES.to_vec(), order).unwrap();
    (cs, fam, en)
}

/// Runs `cases` random comparisons against brute force, panicking on any
/// mismatch. Returns how many selections took more than one step.
pub fn selection_oracle(seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut multi_step, mut unseparated) = (0, 0);
    for case in 0..cases {
        let (cs, fam, en) = random_case(&mut rng);
        assert!(en.len() <= 12);
        let curves = cs.curves();
        // Value vectors along the enumeration; integrals are tested on their own.
        let vectors: Vec<Vec<f64>> = curves
            .iter()
            .map(|c| {
                en.order()
                    .iter()
                    .map(|&(n, j)| integrate(&c.marginals()[j], fam.get(n)).unwrap())
                    .collect()
            })
            .collect();
        let best = vectors
            .iter()
            .max_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap();
        let prefix_class = |k: usize| -> Vec<String> {
            (0..curves.len())
                .filter(|&i| vectors[i][..=k] == best[..=k])
                .map(|i| curves[i].key().to_string())
                .collect()
        };
        let winners = prefix_class(en.len() - 1);
        let distinct_winners = winners
            .iter()
            .any(|k| cs.get(k).unwrap().marginals() != cs.get(&winners[0]).unwrap().marginals());

        match select(&cs, &fam, &en, 0.0) {
            Ok((chosen, trace)) => {
                let mut prev: Vec<String> = trace.candidates.clone();
                for step in &trace.steps {
                    assert_eq!(
                        step.survivor_keys,
                        prefix_class(step.k),
                        "case {case} step {}",
                        step.k
                    );
                    assert!(step.survivor_keys.iter().all(|k| prev.contains(k)));
                    assert!(!step.survivor_keys.is_empty());
                    prev = step.survivor_keys.clone();
                }
                // Winners sort by key; the least one is chosen.
                assert_eq!(chosen.key(), winners[0], "case {case}");
                assert!(!distinct_winners);
                if trace.steps.len() > 1 {
                    multi_step += 1;
                }
            }
            Err(Error::NotSeparating { .. }) => {
                assert!(distinct_winners, "case {case}");
                unseparated += 1;
            }
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    // The lattice makes ties at the first step common; make sure they occur.
    assert!(
        multi_step >= 5,
        "{multi_step} multi-step cases, {unseparated} unseparated"
    );
    multi_step
}

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

use super::{Coefficients, Matrix};
use crate::measure::{DomainBox, Point, MAX_DIM};

/// Finest continuity probe step is `2^-CONTINUITY_LEVELS`.
pub const CONTINUITY_LEVELS: u32 = 20;

/// Largest admissible coefficient increment at the finest probe step.
pub const CONTINUITY_TOLERANCE: f64 = 1e-2;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const DEFINITENESS_TOLERANCE: f64 = -1e-12;

/// Probe points `(t, x)`: every time crossed with every point.
#[derive(Clone, Debug)]
pub struct ProbeSpec {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

impl ProbeSpec {
    /// `n` equispaced times on `[0, horizon]` and `n` equispaced points per axis.
    pub fn uniform(domain: &DomainBox, horizon: f64, n: usize) -> Self {
        let n = n.max(2);
        let lin = |lo: f64, hi: f64| -> Vec<f64> {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        let times = lin(0.0, horizon);
        let xs = lin(domain.lower[0], domain.upper[0]);
        let points = if domain.dim() == 1 {
            xs.iter().map(|&x| [x, 0.0]).collect()
        } else {
            let ys = lin(domain.lower[1], domain.upper[1]);
            ys.iter()
                .flat_map(|&y| xs.iter().map(move |&x| [x, y]))
                .collect()
        };
        Self { times, points }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Worst {
    pub t: f64,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub failures: usize,
    pub worst: Option<Worst>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub probes: usize,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    failures: usize,
    worst: Option<Worst>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            failures: 0,
            worst: None,
        }
    }

    /// Record a violation of size `excess` (larger is worse).
    fn fail(&mut self, t: f64, x: &[f64], value: f64, excess: f64) {
        self.failures += 1;
        let worse = match &self.worst {
            None => true,
            Some(_) if excess.is_nan() => false,
            Some(w) => excess > w.value || w.value.is_nan(),
        };
        if worse {
            self.worst = Some(Worst {
                t,
                x: x.to_vec(),
                value: if excess.is_nan() { value } else { excess },
            });
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name.to_string(),
            passed: self.failures == 0,
            failures: self.failures,
            worst: self.worst,
        }
    }
}

fn eval_a(c: &Coefficients, t: f64, x: &[f64]) -> Option<Matrix> {
    catch_unwind(AssertUnwindSafe(|| c.a(t, x))).ok()
}

fn eval_b(c: &Coefficients, t: f64, x: &[f64]) -> Option<Point> {
    catch_unwind(AssertUnwindSafe(|| c.b(t, x))).ok()
}

fn min_eigenvalue(a: &Matrix, d: usize) -> f64 {
    if d == 1 {
        return a[0][0];
    }
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = ((tr * tr) / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}

/// Which coefficient a continuity modulus is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientField {
    Diffusion,
    Drift,
}

/// `(h, |coef(t, x + h e_axis) − coef(t, x)|_∞)` for `h = 2^-k`, `k = 1..=20`.
pub fn continuity_modulus(
    c: &Coefficients,
    field: CoefficientField,
    t: f64,
    x: &[f64],
    axis: usize,
) -> Vec<(f64, f64)> {
    let d = c.dim();
    let diff = |y: &[f64]| -> f64 {
        match field {
            CoefficientField::Drift => {
                let (p, q) = (c.b(t, x), c.b(t, y));
                (0..d).map(|i| (p[i] - q[i]).abs()).fold(0.0, f64::max)
            }
            CoefficientField::Diffusion => {
                let (p, q) = (c.a(t, x), c.a(t, y));
                let mut m = 0.0_f64;
                for i in 0..d {
                    for j in 0..d {
                        m = m.max((p[i][j] - q[i][j]).abs());
                    }
                }
                m
            }
        }
    };
    (1..=CONTINUITY_LEVELS)
        .map(|k| {
            let h = 0.5_f64.powi(k as i32);
            let mut y = [0.0; MAX_DIM];
            y[..d].copy_from_slice(&x[..d]);
            y[axis] += h;
            (h, diff(&y[..d]))
        })
        .collect()
}

/// Check the standing assumptions on every probe: finite values, symmetric
/// nonnegative-definite `a`, the declared sup bounds, and a sampled modulus
/// of continuity in `x` that is below [`CONTINUITY_TOLERANCE`] at the finest
/// step. Evaluator panics and non-finite values are reported, not raised.
pub fn validate_coefficients(c: &Coefficients, probes: &ProbeSpec) -> ValidationReport {
    let d = c.dim();
    let mut finite = Tally::new("finite");
    let mut symmetric = Tally::new("symmetric");
    let mut definite = Tally::new("nonnegative_definite");
    let mut bound_a = Tally::new("diffusion_bound");
    let mut bound_b = Tally::new("drift_bound");
    let mut continuity = Tally::new("continuity");
    let h = 0.5_f64.powi(CONTINUITY_LEVELS as i32);

    for &t in &probes.times {
        for p in &probes.points {
            let x = &p[..d];
            let (a, b) = match (eval_a(c, t, x), eval_b(c, t, x)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    finite.fail(t, x, f64::NAN, f64::INFINITY);
                    continue;
                }
            };
            let a_ok = (0..d).all(|i| (0..d).all(|j| a[i][j].is_finite()));
            let b_ok = (0..d).all(|i| b[i].is_finite());
            if !(a_ok && b_ok) {
                finite.fail(t, x, f64::NAN, f64::INFINITY);
                continue;
            }
            if d == 2 {
                let asym = (a[0][1] - a[1][0]).abs();
                if asym > SYMMETRY_TOLERANCE {
                    symmetric.fail(t, x, asym, asym);
                }
            }
            let lam = min_eigenvalue(&a, d);
            if lam < DEFINITENESS_TOLERANCE {
                definite.fail(t, x, lam, -lam);
            }
            let amax = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j].abs())
                .fold(0.0, f64::max);
            if amax > c.sup_bound_a() {
                bound_a.fail(t, x, amax, amax - c.sup_bound_a());
            }
            let bnorm = (0..d).map(|i| b[i] * b[i]).sum::<f64>().sqrt();
            if bnorm > c.sup_bound_b() * (1.0 + 1e-12) {
                bound_b.fail(t, x, bnorm, bnorm - c.sup_bound_b());
            }
            for axis in 0..d {
                let mut y = *p;
                y[axis] += h;
                let (ay, by) = match (eval_a(c, t, &y[..d]), eval_b(c, t, &y[..d])) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        finite.fail(t, &y[..d], f64::NAN, f64::INFINITY);
                        continue;
                    }
                };
                let mut jump = 0.0_f64;
                for i in 0..d {
                    jump = jump.max((by[i] - b[i]).abs());
                    for j in 0..d {
                        jump = jump.max((ay[i][j] - a[i][j]).abs());
                    }
                }
                if !(jump <= CONTINUITY_TOLERANCE) {
                    continuity.fail(t, x, jump, jump);
                }
            }
        }
    }
    ValidationReport {
        probes: probes.times.len() * probes.points.len(),
        checks: vec![
            finite.finish(),
            symmetric.finish(),
            definite.finish(),
            bound_a.finish(),
            bound_b.finish(),
            continuity.finish(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{preset, PRESETS};

    #[test]
    fn every_preset_passes_on_a_101_grid() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            let probes = ProbeSpec::uniform(&p.domain_box, p.horizon(), 101);
            let report = validate_coefficients(&p.coefficients, &probes);
            assert!(report.passed(), "{name}: {report:?}");
            assert_eq!(report.probes, 101 * 101);
        }
    }

    #[test]
    fn negative_diffusion_fails_everywhere() {
        let c = Coefficients::new(
            1,
            1.0,
            |_, _| [[-1.0, 0.0], [0.0, 0.0]],
            |_, _| [0.0; 2],
            1.0,
            0.0,
        )
        .unwrap();
        let probes = ProbeSpec::uniform(&DomainBox::symmetric(1, 1.0), 1.0, 11);
        let report = validate_coefficients(&c, &probes);
        assert!(!report.passed());
        let def = report.check("nonnegative_definite").unwrap();
        assert_eq!(def.failures, report.probes);
        assert_eq!(def.worst.as_ref().unwrap().value, 1.0);
    }

    #[test]
    fn sqrt_modulus_behaves_like_square_root() {
        let p = preset("sqrt_branch").unwrap();
        let m = continuity_modulus(&p.coefficients, CoefficientField::Drift, 0.0, &[0.0], 0);
        assert_eq!(m.len(), 20);
        for (h, delta) in &m {
            assert!((delta - h.sqrt()).abs() <= 1e-15, "h={h} delta={delta}");
        }
        for w in m.windows(2) {
            let ratio = w[0].1 / w[1].1;
            assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn discontinuous_drift_and_panics_are_reported() {
        let c = Coefficients::new(
            1,
            1.0,
            |_, _| [[1.0, 0.0], [0.0, 0.0]],
            |_, x| [if x[0] >= 0.0 { 1.0 } else { 0.0 }, 0.0],
            1.0,
            1.0,
        )
        .unwrap();
        let probes = ProbeSpec {
            times: vec![0.0],
            points: vec![[-1e-7, 0.0], [0.5, 0.0]],
        };
        let report = validate_coefficients(&c, &probes);
        assert!(!report.check("continuity").unwrap().passed);

        let bad = Coefficients::new(
            1,
            1.0,
            |_, x| [[if x[0] > 0.0 { f64::NAN } else { 1.0 }, 0.0], [0.0, 0.0]],
            |_, _| [0.0; 2],
            1.0,
            0.0,
        )
        .unwrap();
        let probes = ProbeSpec::uniform(&DomainBox::symmetric(1, 1.0), 1.0, 5);
        let report = validate_coefficients(&bad, &probes);
        assert!(!report.check("finite").unwrap().passed);
    }

    #[test]
    fn two_dimensional_asymmetry_is_caught() {
        let c = Coefficients::new(
            2,
            1.0,
            |_, _| [[1.0, 0.5], [0.4, 1.0]],
            |_, _| [0.0; 2],
            1.0,
            0.0,
        )
        .unwrap();
        let probes = ProbeSpec::uniform(&DomainBox::symmetric(2, 1.0), 1.0, 3);
        let report = validate_coefficients(&c, &probes);
        assert!(!report.check("symmetric").unwrap().passed);
        assert!(report.check("nonnegative_definite").unwrap().passed);
    }
}

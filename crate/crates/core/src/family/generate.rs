use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reasons, CandidateSet, Exclusion, DEFAULT_ADMISSION};
use crate::error::{Error, Result};
use crate::measure::{Measure, Point, MAX_DIM};
use crate::problem::Problem;
use crate::solver::characteristics::{curve_from_paths, integrate_path};
use crate::solver::{
    solve_forward, standard_residual_family, weak_residual_all_pairs, Provenance, SolutionCurve,
    SolverSettings,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One finite-volume (or characteristics) solve.
    SolverSingle,
    /// Exact atom paths of `ẋ = √x⁺` that leave the rest point at declared
    /// times, plus the path that never leaves.
    BranchingCatalog,
    /// Solves with the drift mollified or shifted by each ε of a ladder.
    MollificationLadder,
    /// Pairwise convex combinations of the curves admitted by the others.
    MixtureHull,
}

/// Everything candidate generation needs besides `(p, s, ν)`.
#[derive(Clone, Debug)]
pub struct GenerationParams {
    pub strategies: Vec<Strategy>,
    pub solver: SolverSettings,
    pub admission_tolerance: f64,
    pub ladder: Vec<f64>,
    pub branch_times: Vec<f64>,
    pub mixture_weights: Vec<f64>,
    pub max_branch_combinations: usize,
}

impl GenerationParams {
    pub fn new(strategies: Vec<Strategy>, solver: SolverSettings) -> Self {
        Self {
            strategies,
            solver,
            admission_tolerance: DEFAULT_ADMISSION,
            ladder: vec![1e-9, 1e-11, 1e-13],
            branch_times: Vec::new(),
            mixture_weights: vec![0.5],
            max_branch_combinations: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Rung {
    Mollified,
    ShiftUp,
    ShiftDown,
}

impl Rung {
    fn name(self) -> &'static str {
        match self {
            Rung::Mollified => "mollified",
            Rung::ShiftUp => "shift+",
            Rung::ShiftDown => "shift-",
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Job {
    Solver,
    Branching,
    Ladder(f64, Rung),
}

/// Candidate generator bound to one problem and parameter set.
#[derive(Clone, Debug)]
pub struct Generator {
    problem: Problem,
    params: GenerationParams,
}

/// Four-point Gauss–Legendre nodes and weights on [−1, 1].
const GAUSS: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

impl Generator {
    pub fn new(problem: Problem, params: GenerationParams) -> Result<Self> {
        let record = params.solver.record;
        if (record.horizon - problem.horizon()).abs() > 1e-12 {
            return Err(Error::Generation(format!(
                "record horizon {} differs from the problem horizon {}",
                record.horizon,
                problem.horizon()
            )));
        }
        if params.strategies.is_empty() {
            return Err(Error::Generation("no strategy requested".into()));
        }
        if params.strategies == [Strategy::MixtureHull] {
            return Err(Error::Generation(
                "the mixture hull needs at least one other strategy".into(),
            ));
        }
        if !(params.admission_tolerance > 0.0) {
            return Err(Error::Generation("admission tolerance must be > 0".into()));
        }
        if params.ladder.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Generation("ladder values must be > 0".into()));
        }
        if params
            .mixture_weights
            .iter()
            .any(|l| !(*l > 0.0 && *l < 1.0))
        {
            return Err(Error::Generation(
                "mixture weights must lie in (0, 1)".into(),
            ));
        }
        for &tau in &params.branch_times {
            let i = record.index_of(tau).map_err(|_| {
                Error::Generation(format!("branch time {tau} is not on the record grid"))
            })?;
            if i == record.intervals {
                return Err(Error::Generation(format!(
                    "branch time {tau} must be before the horizon"
                )));
            }
        }
        let uses_catalog = params.strategies.contains(&Strategy::BranchingCatalog);
        if uses_catalog && (problem.preset_id != "sqrt_branch" || problem.dim() != 1) {
            return Err(Error::Generation(format!(
                "the branching catalog applies to the sqrt_branch preset only, not `{}`",
                problem.preset_id
            )));
        }
        Ok(Self { problem, params })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn params(&self) -> &GenerationParams {
        &self.params
    }

    /// Whether `ν` is moved by characteristics rather than on the grid.
    fn transports(&self, nu: &Measure) -> bool {
        self.problem.coefficients.is_degenerate() && nu.is_atomic()
    }

    /// The datum the candidates actually start from: atomic data for a grid
    /// problem is deposited on the solver grid first.
    pub fn canonical_datum(&self, nu: &Measure) -> Result<Measure> {
        if nu.dim() != self.problem.dim() {
            return Err(Error::DimensionMismatch {
                left: nu.dim(),
                right: self.problem.dim(),
            });
        }
        if self.transports(nu) {
            return Ok(nu.clone());
        }
        let grid = self
            .params
            .solver
            .grid
            .as_ref()
            .or(nu.grid())
            .ok_or_else(|| {
                Error::Generation("a solver grid is required for this problem".into())
            })?;
        if nu.grid() == Some(grid) {
            return Ok(nu.clone());
        }
        let moved = nu.deposit(grid)?;
        let shift = crate::measure::wasserstein1(nu, &moved)?;
        if shift > 0.0 {
            log::warn!("initial datum moved onto the solver grid (W1 shift {shift:e})");
        }
        Ok(moved)
    }

    pub fn generate(&self, s: f64, nu: &Measure) -> Result<CandidateSet> {
        let p = &self.problem;
        let settings = &self.params.solver;
        settings.record.index_of(s)?;
        let nu = self.canonical_datum(nu)?;
        let tol = self.params.admission_tolerance;

        let mut jobs = Vec::new();
        for strategy in &self.params.strategies {
            match strategy {
                Strategy::SolverSingle => jobs.push(Job::Solver),
                Strategy::BranchingCatalog => jobs.push(Job::Branching),
                Strategy::MollificationLadder => {
                    for &eps in &self.params.ladder {
                        for rung in [Rung::Mollified, Rung::ShiftUp, Rung::ShiftDown] {
                            jobs.push(Job::Ladder(eps, rung));
                        }
                    }
                }
                Strategy::MixtureHull => {}
            }
        }
        let produced: Vec<Vec<SolutionCurve>> = jobs
            .par_iter()
            .map(|job| self.run(*job, s, &nu))
            .collect::<Result<_>>()?;
        let raw: Vec<SolutionCurve> = produced.into_iter().flatten().collect();

        let fs = standard_residual_family(p.dim());
        let mut exclusions = Vec::new();
        let mut kept: Vec<SolutionCurve> = Vec::new();
        self.admit_into(raw, &fs, tol, &mut kept, &mut exclusions)?;

        if self.params.strategies.contains(&Strategy::MixtureHull) {
            let base = kept.clone();
            let mut mixes = Vec::new();
            for i in 0..base.len() {
                for j in i + 1..base.len() {
                    for &l in &self.params.mixture_weights {
                        mixes.push(mixture_curve(&base[i], &base[j], l)?);
                    }
                }
            }
            self.admit_into(mixes, &fs, tol, &mut kept, &mut exclusions)?;
        }
        if kept.is_empty() {
            return Err(Error::EmptyCandidateSet {
                s,
                reasons: reasons(&exclusions),
            });
        }
        Ok(CandidateSet::new(s, nu, kept, tol)?.with_exclusions(exclusions))
    }

    /// Certify in parallel, then filter duplicates in generation order.
    fn admit_into(
        &self,
        curves: Vec<SolutionCurve>,
        fs: &[crate::measure::TestFunction],
        tol: f64,
        kept: &mut Vec<SolutionCurve>,
        exclusions: &mut Vec<Exclusion>,
    ) -> Result<()> {
        let certs = curves
            .par_iter()
            .map(|c| weak_residual_all_pairs(c, &self.problem, fs))
            .collect::<Result<Vec<_>>>()?;
        'next: for (c, cert) in curves.into_iter().zip(certs) {
            if cert.value > tol {
                log::info!("excluding `{}`: residual {:e}", c.label(), cert.value);
                exclusions.push(Exclusion {
                    label: c.label().to_string(),
                    key: c.key().to_string(),
                    reason: format!("residual {:e} > {tol:e}", cert.value),
                });
                continue;
            }
            for k in kept.iter() {
                let d = c.sup_distance(k)?;
                if d <= tol {
                    exclusions.push(Exclusion {
                        label: c.label().to_string(),
                        key: c.key().to_string(),
                        reason: format!("duplicate of `{}` (max W1 {d:e})", k.label()),
                    });
                    continue 'next;
                }
            }
            kept.push(c.with_certificate(cert));
        }
        Ok(())
    }

    fn run(&self, job: Job, s: f64, nu: &Measure) -> Result<Vec<SolutionCurve>> {
        let p = &self.problem;
        let settings = &self.params.solver;
        match job {
            Job::Solver => Ok(vec![solve_forward(p, s, nu, settings)?.with_label("solver")]),
            Job::Branching => self.branching(s, nu),
            Job::Ladder(eps, rung) => {
                let q = ladder_problem(p, eps, rung);
                let label = format!("ladder[eps={eps:e},{}]", rung.name());
                Ok(vec![solve_forward(&q, s, nu, settings)?.with_label(label)])
            }
        }
    }

    fn branching(&self, s: f64, nu: &Measure) -> Result<Vec<SolutionCurve>> {
        if !nu.is_atomic() {
            return Err(Error::Generation(
                "the branching catalog needs atomic data".into(),
            ));
        }
        let p = &self.problem;
        let settings = &self.params.solver;
        let record = settings.record;
        let i0 = record.index_of(s)?;
        let n = record.intervals + 1 - i0;
        let mut taus: Vec<usize> = self
            .params
            .branch_times
            .iter()
            .map(|&t| record.index_of(t))
            .collect::<Result<_>>()?;
        taus.retain(|&i| i >= i0);
        taus.sort_unstable();
        taus.dedup();

        // Options per atom: (path, label).
        let mut options: Vec<Vec<(Vec<Point>, String)>> = Vec::with_capacity(nu.len());
        for k in 0..nu.len() {
            let x = nu.location(k);
            let mut opts = Vec::new();
            if x[0] == 0.0 {
                opts.push((vec![x; n], "stay".to_string()));
                for &it in &taus {
                    let mut path = vec![x; it - i0];
                    path.extend(integrate_path(p, settings, it, x, true)?);
                    opts.push((path, format!("branch[tau={}]", record.time(it))));
                }
            } else {
                opts.push((
                    integrate_path(p, settings, i0, x, false)?,
                    "path".to_string(),
                ));
            }
            options.push(opts);
        }
        let combos: usize = options.iter().map(Vec::len).product();
        if combos > self.params.max_branch_combinations {
            return Err(Error::Generation(format!(
                "{combos} branch combinations exceed the cap {}",
                self.params.max_branch_combinations
            )));
        }
        let mut out = Vec::with_capacity(combos);
        let mut choice = vec![0usize; options.len()];
        loop {
            let paths: Vec<Vec<Point>> = choice
                .iter()
                .zip(&options)
                .map(|(&c, o)| o[c].0.clone())
                .collect();
            let label = choice
                .iter()
                .zip(&options)
                .map(|(&c, o)| o[c].1.as_str())
                .collect::<Vec<_>>()
                .join("+");
            out.push(curve_from_paths(
                p,
                settings,
                i0,
                &paths,
                nu.weights(),
                Provenance::BranchingCatalog,
                label,
            )?);
            // Odometer over the per-atom options.
            let mut a = 0;
            loop {
                if a == choice.len() {
                    return Ok(out);
                }
                choice[a] += 1;
                if choice[a] < options[a].len() {
                    break;
                }
                choice[a] = 0;
                a += 1;
            }
        }
    }
}

/// Problem with the drift replaced by one Lipschitz-regularized rung.
fn ladder_problem(p: &Problem, eps: f64, rung: Rung) -> Problem {
    let base = p.clone();
    let d = p.dim();
    let sup = p.coefficients.sup_bound_b();
    let label = format!("ladder(eps={eps:e},{})", rung.name());
    match rung {
        Rung::ShiftUp | Rung::ShiftDown => {
            let h = if matches!(rung, Rung::ShiftUp) {
                eps
            } else {
                -eps
            };
            p.with_drift(
                move |t, x| {
                    let mut y = [0.0; MAX_DIM];
                    for i in 0..d {
                        y[i] = x[i] + h;
                    }
                    base.drift(t, &y[..d])
                },
                sup,
                &label,
            )
        }
        Rung::Mollified => p.with_drift(
            move |t, x| {
                let mut acc = [0.0; MAX_DIM];
                let ny = if d == 2 { GAUSS.len() } else { 1 };
                for &(u, wu) in &GAUSS {
                    for &(v, wv) in GAUSS.iter().take(ny) {
                        let mut y = [0.0; MAX_DIM];
                        y[0] = x[0] + eps * u;
                        let mut w = 0.5 * wu;
                        if d == 2 {
                            y[1] = x[1] + eps * v;
                            w *= 0.5 * wv;
                        }
                        let b = base.drift(t, &y[..d]);
                        for i in 0..d {
                            acc[i] += w * b[i];
                        }
                    }
                }
                acc
            },
            sup,
            &label,
        ),
    }
}

/// `λ·a + (1 − λ)·b` marginal by marginal.
pub(crate) fn mixture_curve(a: &SolutionCurve, b: &SolutionCurve, l: f64) -> Result<SolutionCurve> {
    if a.times() != b.times() {
        return Err(Error::InvalidCurve(
            "mixture of curves on different time grids".into(),
        ));
    }
    let marginals = a
        .marginals()
        .iter()
        .zip(b.marginals())
        .map(|(x, y)| Measure::mixture(&[(l, x), (1.0 - l, y)]))
        .collect::<Result<Vec<_>>>()?;
    SolutionCurve::new(
        a.times().to_vec(),
        marginals,
        Provenance::Mixture,
        format!("mix[{l}:{}|{}]", a.label(), b.label()),
    )
}

/// Candidates for `(s, ν)` under `params`.
pub fn generate_candidates(
    p: &Problem,
    s: f64,
    nu: &Measure,
    params: &GenerationParams,
) -> Result<CandidateSet> {
    Generator::new(p.clone(), params.clone())?.generate(s, nu)
}

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{Config, Setup, Stage};
use super::replay::TraceBundle;
use crate::error::{Error, Result};
use crate::family::{CandidateManifest, CandidateSet};
use crate::measure::{wasserstein1, write_csv, Measure};
use crate::particles::{
    marginals, martingale_residual, simulate_particles, summarize, write_raw, EnsembleSummary,
};
use crate::problem::{validate_coefficients, ProbeSpec};
use crate::selection::{
    assemble_flow, default_tie_tolerance, select, FlowEntrySummary, FlowTable, SelectionTrace,
};
use crate::solver::{write_curve, SolutionCurve};
use crate::verify::{all_triples, check_flow_property, wellposedness_probe, FlowReport, Verdict};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub expect_wellposed: bool,
    pub config_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: Stage,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub selected: String,
    pub label: String,
    pub tie_tolerance: f64,
    pub steps: usize,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    pub t: f64,
    pub w1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleReport {
    pub summary: EnsembleSummary,
    pub w1_to_selected: Vec<W1Row>,
    pub passed: bool,
}

/// Deterministic run report; wall-clock data go to `metadata.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: Config,
    pub initial: String,
    pub stages: Vec<StageStatus>,
    pub validation: Option<serde_json::Value>,
    pub candidates: Option<CandidateManifest>,
    pub selection: Option<SelectionSummary>,
    pub flow: Option<Vec<FlowEntrySummary>>,
    pub flow_check: Option<FlowReport>,
    pub probe: Option<Verdict>,
    pub particles: Option<ParticleReport>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: i32,
    pub message: String,
}

struct Writer<'a> {
    out: &'a Path,
    written: BTreeSet<String>,
}

impl Writer<'_> {
    fn json(&self, rel: &str, value: &impl Serialize) -> Result<()> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn text(&self, rel: &str, text: &str) -> Result<()> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn curve(&mut self, c: &SolutionCurve) -> Result<String> {
        let rel = format!("candidates/{}", c.key());
        if self.written.insert(c.key().to_string()) {
            write_curve(c, &self.out.join(&rel))?;
        }
        Ok(rel)
    }

    fn measure(&mut self, m: &Measure) -> Result<String> {
        let rel = format!("measures/{}.csv", m.key());
        if self.written.insert(rel.clone()) {
            let path = self.out.join(&rel);
            fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
            write_csv(m, &path)?;
        }
        Ok(rel)
    }

    /// Trace plus everything replay needs, paths relative to `traces/`.
    fn trace(
        &mut self,
        name: &str,
        setup: &Setup,
        cs: &CandidateSet,
        trace: &SelectionTrace,
    ) -> Result<()> {
        let mut candidates = Vec::new();
        for c in cs.curves() {
            candidates.push(format!("../{}", self.curve(c)?));
        }
        let nu = format!("../{}", self.measure(cs.nu())?);
        let bundle = TraceBundle {
            trace: trace.clone(),
            enumeration: setup.enumeration.clone(),
            dim: setup.problem.dim(),
            admission_tolerance: cs.admission_tolerance(),
            nu,
            candidates,
        };
        self.json(&format!("traces/{name}.json"), &bundle)?;
        self.json(&format!("manifests/{name}.json"), &cs.manifest())
    }
}

/// Labels may contain commas.
fn field(label: &str) -> String {
    label.replace(',', ";")
}

fn moments_csv(rows: &mut String, name: &str, c: &SolutionCurve) {
    for (t, m) in c.times().iter().zip(c.marginals()) {
        let mean = m.mean();
        let _ = writeln!(
            rows,
            "{},{},{t},{},{}",
            field(name),
            c.key(),
            mean[0],
            m.second_moment()
        );
    }
}

fn atoms_csv(rows: &mut String, c: &SolutionCurve) {
    for (t, m) in c.times().iter().zip(c.marginals()) {
        if !m.is_atomic() {
            return;
        }
        for (x, w) in m.iter() {
            let coords: Vec<String> = x[..m.dim()].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                rows,
                "{},{},{t},{},{w}",
                field(c.label()),
                c.key(),
                coords.join(" ")
            );
        }
    }
}

fn gaps_csv(
    rows: &mut String,
    name: &str,
    c: &SolutionCurve,
    reference: &SolutionCurve,
) -> Result<()> {
    for (t, m) in c.times().iter().zip(c.marginals()) {
        let d = wasserstein1(m, reference.marginal_at(*t)?)?;
        let _ = writeln!(rows, "{},{},{t},{d}", field(name), c.key());
    }
    Ok(())
}

struct State<'a> {
    setup: &'a Setup,
    cfg: &'a Config,
    writer: Writer<'a>,
    report: Report,
    candidates: Option<CandidateSet>,
    selected: Option<SolutionCurve>,
    table: Option<FlowTable>,
    moments: String,
    atoms: String,
    gaps: String,
}

impl State<'_> {
    fn status(&mut self, stage: Stage, passed: bool, detail: String) {
        log::info!(
            "stage {}: {} ({detail})",
            stage.name(),
            if passed { "pass" } else { "FAIL" }
        );
        self.report.stages.push(StageStatus {
            stage,
            passed,
            detail,
        });
    }

    fn run_stage(&mut self, stage: Stage, seed: u64) -> Result<()> {
        let setup = self.setup;
        let cfg = self.cfg;
        match stage {
            Stage::Validate => {
                let p = &setup.problem;
                let probes =
                    ProbeSpec::uniform(&p.domain_box, p.horizon(), cfg.run.validation_probes);
                let v = validate_coefficients(&p.coefficients, &probes);
                let failed: Vec<&str> = v
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                let detail = if failed.is_empty() {
                    format!("{} probe points", v.probes)
                } else {
                    format!("failed checks: {}", failed.join(", "))
                };
                self.report.validation = Some(serde_json::to_value(&v)?);
                self.status(stage, v.passed(), detail);
            }
            Stage::Generate => {
                let cs = setup.generator.generate(setup.s, &setup.nu)?;
                for c in cs.curves() {
                    moments_csv(&mut self.moments, c.label(), c);
                    atoms_csv(&mut self.atoms, c);
                }
                let detail = format!("{} admitted, {} excluded", cs.len(), cs.exclusions().len());
                self.report.candidates = Some(cs.manifest());
                self.candidates = Some(cs);
                self.status(stage, true, detail);
            }
            Stage::Select => {
                let cs = self.candidates.as_ref().expect("generate runs first");
                let tol = cfg
                    .selection
                    .tie_tolerance
                    .unwrap_or_else(|| default_tie_tolerance(cs));
                let (chosen, trace) = select(cs, &setup.family, &setup.enumeration, tol)?;
                self.writer.trace("select", setup, cs, &trace)?;
                moments_csv(&mut self.moments, "selected", &chosen);
                for c in cs.curves() {
                    gaps_csv(&mut self.gaps, c.label(), c, &chosen)?;
                }
                let detail = format!(
                    "selected {} after {} steps",
                    chosen.label(),
                    trace.steps.len()
                );
                self.report.selection = Some(SelectionSummary {
                    selected: chosen.key().to_string(),
                    label: chosen.label().to_string(),
                    tie_tolerance: tol,
                    steps: trace.steps.len(),
                    exhausted: trace.exhausted,
                });
                self.selected = Some(chosen);
                self.status(stage, true, detail);
            }
            Stage::Assemble => {
                let table = assemble_flow(
                    &setup.generator,
                    &[(setup.s, setup.nu.clone())],
                    &setup.family,
                    &setup.enumeration,
                    cfg.selection.tie_tolerance,
                )?;
                for (i, e) in table.entries().enumerate() {
                    self.writer
                        .trace(&format!("flow_{i:03}"), setup, &e.candidates, &e.trace)?;
                }
                let detail = format!("{} entries", table.len());
                self.report.flow = Some(table.summary());
                self.table = Some(table);
                self.status(stage, true, detail);
            }
            Stage::FlowCheck => {
                let table = self.table.as_ref().expect("assemble runs first");
                let tol = cfg.flow.tolerance.unwrap_or(if setup.nu.is_atomic() {
                    1e-9
                } else {
                    2.0 * cfg.generation.admission_tolerance
                });
                let r = check_flow_property(table, &all_triples(table.checkpoints()), tol)?;
                let worst = r.worst.as_ref().map(|w| w.distance).unwrap_or(0.0);
                let detail = format!(
                    "{} triples, worst W1 {worst:e} (tolerance {tol:e})",
                    r.checks.len()
                );
                let passed = r.passed;
                self.report.flow_check = Some(r);
                self.status(stage, passed, detail);
            }
            Stage::Probe => {
                let out = wellposedness_probe(
                    &setup.generator,
                    setup.s,
                    &setup.nu,
                    &setup.family,
                    &setup.enumeration,
                    cfg.selection.tie_tolerance,
                )?;
                let detail = match &out.verdict {
                    Verdict::NotWellPosed { witness, gap, .. } => format!(
                        "not well-posed: witness {} at t = {}, W1 gap {gap}",
                        witness.function_id, witness.time
                    ),
                    Verdict::WellPosedAtScale { candidates, .. } => {
                        format!("well-posed at scale over {candidates} candidates")
                    }
                };
                if let Some(beta) = &out.adversarial {
                    gaps_csv(&mut self.gaps, "probe_adversarial", beta, &out.base)?;
                    self.writer.curve(beta)?;
                    self.writer.curve(&out.base)?;
                }
                self.writer.json(
                    "probe.json",
                    &serde_json::json!({
                        "verdict": out.verdict,
                        "tie_tolerance": out.tie_tolerance,
                        "adversarial_enumeration": out.adversarial_enumeration,
                        "candidates": out.candidates,
                    }),
                )?;
                self.report.probe = Some(out.verdict);
                self.status(stage, true, detail);
            }
            Stage::Particles => {
                let pc = &cfg.particles;
                let e = simulate_particles(&setup.problem, setup.s, &setup.nu, pc.n, pc.dt, seed)?;
                let times = setup.enumeration.checkpoints_from(setup.s);
                let m = marginals(&e, &times)?;
                moments_csv(&mut self.moments, "particles", &m);
                let mut w1 = Vec::new();
                if let (true, Some(sel)) = (pc.compare_to_flow, &self.selected) {
                    for (t, mt) in m.times().iter().zip(m.marginals()) {
                        w1.push(W1Row {
                            t: *t,
                            w1: wasserstein1(mt, sel.marginal_at(*t)?)?,
                        });
                    }
                }
                let phis: Vec<_> = cfg
                    .particle_functions(setup.problem.dim())
                    .iter()
                    .map(|id| setup.family.get(setup.family.index_of(id).unwrap()).clone())
                    .collect();
                let pairs: Vec<(f64, f64)> = pc.pairs.iter().map(|p| (p[0], p[1])).collect();
                let residual = martingale_residual(&e, &setup.problem, &phis, &pairs, pc.windows)?;
                let w1_ok = w1.iter().all(|r| r.w1 <= pc.w1_tolerance);
                let passed = w1_ok && residual.passed();
                let worst = w1.iter().map(|r| r.w1).fold(0.0, f64::max);
                let detail = format!(
                    "martingale statistic {:e} vs threshold {:e}; worst W1 {worst:e}",
                    residual.statistic, residual.threshold
                );
                let summary = summarize(&e, &times, Some(residual))?;
                self.writer.json("particles/summary.json", &summary)?;
                if pc.raw_dump {
                    write_raw(&e, &self.writer.out.join("particles/paths.bin"))?;
                }
                self.report.particles = Some(ParticleReport {
                    summary,
                    w1_to_selected: w1,
                    passed,
                });
                self.status(stage, passed, detail);
            }
        }
        Ok(())
    }
}

/// Execute the configured stages and write all artifacts under `opts.out`.
/// Config problems surface as `Err`; stage failures are reported in the
/// outcome with exit code 1.
pub fn run(cfg: &Config, opts: &RunOptions) -> Result<RunOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Config(format!("key `run.workers`: {e}")))?;
    let setup = pool.install(|| cfg.setup())?;
    fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;

    let mut state = State {
        setup: &setup,
        cfg: &cfg,
        writer: Writer {
            out: &opts.out,
            written: BTreeSet::new(),
        },
        report: Report {
            config: cfg.clone(),
            initial: setup.nu.key(),
            stages: vec![],
            validation: None,
            candidates: None,
            selection: None,
            flow: None,
            flow_check: None,
            probe: None,
            particles: None,
            passed: false,
        },
        candidates: None,
        selected: None,
        table: None,
        moments: "curve,key,t,mean,second_moment\n".into(),
        atoms: "curve,key,t,x,weight\n".into(),
        gaps: "curve,key,t,w1_to_selected\n".into(),
    };
    let mut message = String::new();
    for &stage in &cfg.run.stages {
        if let Err(e) = pool.install(|| state.run_stage(stage, cfg.run.seed)) {
            message = format!("stage {} failed: {e}", stage.name());
            log::error!("{message}");
            state.status(stage, false, e.to_string());
            break;
        }
    }
    let w = &state.writer;
    w.text("plots/moments.csv", &state.moments)?;
    w.text("plots/atoms.csv", &state.atoms)?;
    w.text("plots/w1_gaps.csv", &state.gaps)?;

    let mut report = state.report;
    report.passed = report.stages.iter().all(|s| s.passed);
    let mut exit_code = if report.passed { 0 } else { 1 };
    if message.is_empty() {
        if let Some(s) = report.stages.iter().find(|s| !s.passed) {
            message = format!("stage {} failed: {}", s.stage.name(), s.detail);
        }
    }
    if opts.expect_wellposed {
        if let Some(v @ Verdict::NotWellPosed { .. }) = &report.probe {
            exit_code = 1;
            if message.is_empty() {
                message = format!(
                    "expected a well-posed problem, probe says {}",
                    serde_json::to_string(v)?
                );
            }
        }
    }
    Writer {
        out: &opts.out,
        written: BTreeSet::new(),
    }
    .json("report.json", &report)?;
    let unix = |t: SystemTime| {
        t.duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    };
    Writer {
        out: &opts.out,
        written: BTreeSet::new(),
    }
    .json(
        "metadata.json",
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_path": opts.config_path,
            "started_unix": unix(started),
            "finished_unix": unix(SystemTime::now()),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "exit_code": exit_code,
        }),
    )?;
    Ok(RunOutcome {
        report,
        exit_code,
        message,
    })
}

//! Euler–Maruyama ensembles for the SDE behind `L`, their marginal curves,
//! and an empirical martingale-problem check.

use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Measure, Point, TestFunction, MAX_DIM};
use crate::problem::{Matrix, Problem};
use crate::solver::{Provenance, SolutionCurve};

/// Particle paths on the step grid `s + k·dt`, stored particle-major.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    dim: usize,
    n: usize,
    steps: usize,
    s: f64,
    dt: f64,
    seed: u64,
    problem_id: String,
    paths: Vec<f64>,
}

/// Symmetric square root of `a`, negative eigenvalues clipped to zero.
pub fn diffusion_root(a: &Matrix, dim: usize) -> Result<Matrix> {
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    if dim == 1 {
        out[0][0] = a[0][0].max(0.0).sqrt();
    } else {
        let (p, q, r) = (a[0][0], 0.5 * (a[0][1] + a[1][0]), a[1][1]);
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        let (l1, l2) = (mean + rad, mean - rad);
        // Unit eigenvector for l1; the other is its rotation.
        let (vx, vy) = if q.abs() > 1e-300 {
            let (x, y) = (l1 - r, q);
            let n = x.hypot(y);
            (x / n, y / n)
        } else if p >= r {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let (s1, s2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
        out[0][0] = s1 * vx * vx + s2 * vy * vy;
        out[0][1] = (s1 - s2) * vx * vy;
        out[1][0] = out[0][1];
        out[1][1] = s1 * vy * vy + s2 * vx * vx;
    }
    if out.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Simulation(format!(
            "no square root for diffusion {a:?}"
        )));
    }
    Ok(out)
}

fn sample_start(nu: &Measure, rng: &mut ChaCha8Rng, pick: &WeightedIndex<f64>) -> Point {
    let mut x = nu.location(rng.sample(pick));
    if let Some(g) = nu.grid() {
        for v in x.iter_mut().take(nu.dim()) {
            *v += g.spacing() * (rng.random::<f64>() - 0.5);
        }
    }
    x
}

/// Simulate `n` paths of `dX = b dt + σ dW`, `σσᵀ = a`, started i.i.d.
/// from `ν` at `s`. Particle `i` draws from stream `i` of a ChaCha8
/// generator keyed by `seed`, so results do not depend on scheduling.
/// Grid data are sampled uniformly within the chosen cell.
pub fn simulate_particles(
    p: &Problem,
    s: f64,
    nu: &Measure,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let dim = p.dim();
    if nu.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: nu.dim(),
            right: dim,
        });
    }
    if n == 0 || !(dt > 0.0) {
        return Err(Error::Simulation("need n > 0 and dt > 0".into()));
    }
    let span = p.horizon() - s;
    let steps = (span / dt).round() as usize;
    if span < 0.0 || ((steps as f64) * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::Simulation(format!(
            "dt = {dt} does not divide [{s}, {}]",
            p.horizon()
        )));
    }
    let pick = WeightedIndex::new(nu.weights())
        .map_err(|e| Error::Simulation(format!("cannot sample the initial datum: {e}")))?;
    let stride = (steps + 1) * dim;
    let mut paths = vec![0.0; n * stride];
    let sqrt_dt = dt.sqrt();
    paths
        .par_chunks_mut(stride)
        .enumerate()
        .try_for_each(|(i, path)| -> Result<()> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = sample_start(nu, &mut rng, &pick);
            path[..dim].copy_from_slice(&x[..dim]);
            for k in 0..steps {
                let t = s + k as f64 * dt;
                let b = p.drift(t, &x[..dim]);
                let sigma = diffusion_root(&p.diffusion(t, &x[..dim]), dim)?;
                let mut xi = [0.0; MAX_DIM];
                for v in xi.iter_mut().take(dim) {
                    *v = rng.sample(StandardNormal);
                }
                let prev = x;
                for c in 0..dim {
                    let noise: f64 = (0..dim).map(|j| sigma[c][j] * xi[j]).sum();
                    x[c] = prev[c] + b[c] * dt + noise * sqrt_dt;
                }
                if x[..dim].iter().any(|v| !v.is_finite()) {
                    return Err(Error::Simulation(format!(
                        "particle {i} became non-finite at step {}",
                        k + 1
                    )));
                }
                path[(k + 1) * dim..(k + 2) * dim].copy_from_slice(&x[..dim]);
            }
            Ok(())
        })?;
    Ok(ParticleEnsemble {
        dim,
        n,
        steps,
        s,
        dt,
        seed,
        problem_id: p.preset_id.clone(),
        paths,
    })
}

impl ParticleEnsemble {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn horizon(&self) -> f64 {
        self.s + self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn paths(&self) -> &[f64] {
        &self.paths
    }

    pub fn time(&self, k: usize) -> f64 {
        self.s + k as f64 * self.dt
    }

    /// Step index of `t`, which must lie on the step grid.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let k = ((t - self.s) / self.dt).round();
        if k < 0.0 || k as usize > self.steps || (self.time(k as usize) - t).abs() > 1e-9 {
            return Err(Error::OffGrid { time: t });
        }
        Ok(k as usize)
    }

    pub fn position(&self, i: usize, k: usize) -> &[f64] {
        let at = (i * (self.steps + 1) + k) * self.dim;
        &self.paths[at..at + self.dim]
    }

    fn empirical(&self, k: usize) -> Result<Measure> {
        let locations = (0..self.n).map(|i| self.position(i, k).to_vec()).collect();
        Measure::atoms(self.dim, locations, vec![1.0 / self.n as f64; self.n])
    }

    /// Moments `(mean, ∫|x|² )` at step `k`.
    fn moments(&self, k: usize) -> (Vec<f64>, f64) {
        let mut mean = vec![0.0; self.dim];
        let mut m2 = 0.0;
        for i in 0..self.n {
            for (c, v) in self.position(i, k).iter().enumerate() {
                mean[c] += v;
                m2 += v * v;
            }
        }
        let n = self.n as f64;
        (mean.into_iter().map(|v| v / n).collect(), m2 / n)
    }
}

/// Empirical marginals at `times`, equal weights `1/N`.
pub fn marginals(e: &ParticleEnsemble, times: &[f64]) -> Result<SolutionCurve> {
    let ks = times
        .iter()
        .map(|&t| e.step_index(t))
        .collect::<Result<Vec<_>>>()?;
    let ms = ks
        .par_iter()
        .map(|&k| e.empirical(k))
        .collect::<Result<Vec<_>>>()?;
    let ts = ks.iter().map(|&k| e.time(k)).collect();
    SolutionCurve::new(
        ts,
        ms,
        Provenance::Particle,
        format!("particles[n={},seed={}]", e.n, e.seed),
    )
}

/// Largest `|Ê[(M_t − M_r)·1{X_r ∈ window}]|` and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub statistic: f64,
    /// `3·max σ̂/√N` over all summands.
    pub threshold: f64,
    pub function_id: String,
    pub r: f64,
    pub t: f64,
    pub window: usize,
    pub n_windows: usize,
    pub particles: usize,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.statistic <= self.threshold
    }
}

/// Test `M_t = φ(X_t) − ∫_s^t L_uφ(X_u) du` (left Riemann sums on the step
/// grid) against `n_windows` equal-count bins of `X_r`, ranked by the first
/// coordinate with ties broken by particle index.
pub fn martingale_residual(
    e: &ParticleEnsemble,
    p: &Problem,
    phis: &[TestFunction],
    pairs: &[(f64, f64)],
    n_windows: usize,
) -> Result<MartingaleReport> {
    if n_windows == 0 || n_windows > e.n || phis.is_empty() || pairs.is_empty() {
        return Err(Error::Simulation(
            "need functions, pairs and 1..=N windows".into(),
        ));
    }
    if let Some(f) = phis.iter().find(|f| !f.has_analytic_derivatives()) {
        return Err(Error::MissingDerivatives(f.id().to_string()));
    }
    let idx = pairs
        .iter()
        .map(|&(r, t)| {
            let (kr, kt) = (e.step_index(r)?, e.step_index(t)?);
            if kr > kt {
                return Err(Error::TimePair {
                    t1: r,
                    t2: t,
                    s: e.s,
                    horizon: e.horizon(),
                });
            }
            Ok((kr, kt))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut wanted: Vec<usize> = idx.iter().flat_map(|&(a, b)| [a, b]).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let last = *wanted.last().unwrap();

    let windows: Vec<Vec<usize>> = idx
        .iter()
        .map(|&(kr, _)| {
            let mut order: Vec<usize> = (0..e.n).collect();
            order.sort_by(|&a, &b| {
                e.position(a, kr)[0]
                    .total_cmp(&e.position(b, kr)[0])
                    .then(a.cmp(&b))
            });
            let mut w = vec![0; e.n];
            for (rank, &i) in order.iter().enumerate() {
                w[i] = rank * n_windows / e.n;
            }
            w
        })
        .collect();

    let mut best: Option<MartingaleReport> = None;
    let mut max_sd: f64 = 0.0;
    let n = e.n as f64;
    for f in phis {
        // M at the wanted steps, per particle.
        let m: Vec<Vec<f64>> = (0..e.n)
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::with_capacity(wanted.len());
                let mut acc = 0.0;
                let mut next = 0;
                for k in 0..=last {
                    let x = e.position(i, k);
                    if wanted[next] == k {
                        out.push(f.eval(x) - acc);
                        next += 1;
                        if next == wanted.len() {
                            break;
                        }
                    }
                    acc += p.generator(e.time(k), x, f) * e.dt;
                }
                out
            })
            .collect();
        for (pi, &(kr, kt)) in idx.iter().enumerate() {
            let (jr, jt) = (
                wanted.binary_search(&kr).unwrap(),
                wanted.binary_search(&kt).unwrap(),
            );
            let mut sum = vec![0.0; n_windows];
            let mut sq = vec![0.0; n_windows];
            for (i, mi) in m.iter().enumerate() {
                let d = mi[jt] - mi[jr];
                let w = windows[pi][i];
                sum[w] += d;
                sq[w] += d * d;
            }
            for w in 0..n_windows {
                let mean = sum[w] / n;
                let var = (sq[w] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
                max_sd = max_sd.max(var.sqrt());
                if best
                    .as_ref()
                    .map(|b| mean.abs() > b.statistic)
                    .unwrap_or(true)
                {
                    best = Some(MartingaleReport {
                        statistic: mean.abs(),
                        threshold: 0.0,
                        function_id: f.id().to_string(),
                        r: e.time(kr),
                        t: e.time(kt),
                        window: w,
                        n_windows,
                        particles: e.n,
                    });
                }
            }
        }
    }
    let mut report = best.unwrap();
    report.threshold = 3.0 * max_sd / n.sqrt();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub mean: Vec<f64>,
    pub second_moment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub problem: String,
    pub particles: usize,
    pub dim: usize,
    pub s: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub moments: Vec<MomentRow>,
    pub residual: Option<MartingaleReport>,
}

pub fn summarize(
    e: &ParticleEnsemble,
    times: &[f64],
    residual: Option<MartingaleReport>,
) -> Result<EnsembleSummary> {
    let moments = times
        .iter()
        .map(|&t| {
            let (mean, second_moment) = e.moments(e.step_index(t)?);
            Ok(MomentRow {
                t,
                mean,
                second_moment,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleSummary {
        problem: e.problem_id.clone(),
        particles: e.n,
        dim: e.dim,
        s: e.s,
        horizon: e.horizon(),
        dt: e.dt,
        seed: e.seed,
        moments,
        residual,
    })
}

/// Raw dump: little-endian `N: u64, steps: u64, dt: f64, s: f64`, then the
/// paths row-major (particle, step, coordinate) as `f64`.
pub fn write_raw(e: &ParticleEnsemble, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * e.paths.len());
    buf.extend_from_slice(&(e.n as u64).to_le_bytes());
    buf.extend_from_slice(&(e.steps as u64).to_le_bytes());
    buf.extend_from_slice(&e.dt.to_le_bytes());
    buf.extend_from_slice(&e.s.to_le_bytes());
    for v in &e.paths {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|err| Error::io(path, err))
}

/// Header and paths of a raw dump.
pub fn read_raw(path: &Path) -> Result<(usize, usize, f64, f64, Vec<f64>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|err| Error::io(path, err))?;
    if buf.len() < 32 || (buf.len() - 32) % 8 != 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "truncated particle dump".into(),
        });
    }
    let word = |i: usize| <[u8; 8]>::try_from(&buf[8 * i..8 * i + 8]).unwrap();
    let values = (4..buf.len() / 8)
        .map(|i| f64::from_le_bytes(word(i)))
        .collect();
    Ok((
        u64::from_le_bytes(word(0)) as usize,
        u64::from_le_bytes(word(1)) as usize,
        f64::from_le_bytes(word(2)),
        f64::from_le_bytes(word(3)),
        values,
    ))
}

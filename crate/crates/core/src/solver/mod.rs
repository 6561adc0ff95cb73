//! Forward solution of the Cauchy problem and weak-form certification of
//! arbitrary curves of measures.

pub(crate) mod characteristics;
mod curve;
mod grid_scheme;
pub mod io;
mod residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{GridSpec, Measure};
use crate::problem::Problem;
use crate::util::grid_index;

pub use characteristics::rk4_step;
pub use curve::{Provenance, SolutionCurve};
pub use grid_scheme::stable_time_step;
pub use io::{read_curve, write_curve};
pub use residual::{
    narrow_continuity_modulus, standard_residual_family, weak_residual, weak_residual_all_pairs,
    ResidualCertificate,
};

/// Uniform global time grid `{horizon · i / intervals}` shared by every curve
/// of a computation. Checkpoints and restarts are grid points, so restriction
/// never interpolates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon > 0.0) || intervals == 0 {
            return Err(Error::InvalidCurve(format!(
                "time grid needs horizon > 0 and at least one interval, got {horizon}, {intervals}"
            )));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn spacing(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.intervals as f64
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(t, self.horizon, self.intervals).ok_or(Error::OffGrid { time: t })
    }

    /// Grid times from `s` to the horizon.
    pub fn times_from(&self, s: f64) -> Result<Vec<f64>> {
        let i0 = self.index_of(s)?;
        Ok((i0..=self.intervals).map(|i| self.time(i)).collect())
    }
}

/// Discretization parameters of [`solve_forward`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    /// Internal time step; must divide the record spacing.
    pub dt: f64,
    /// Spatial grid. Required unless the diffusion vanishes and the initial
    /// datum is atomic (then atoms are transported along characteristics).
    pub grid: Option<GridSpec>,
    /// Times at which marginals are stored.
    pub record: TimeGrid,
}

impl SolverSettings {
    /// Internal steps per record interval and the exact step length.
    pub(crate) fn substeps(&self) -> Result<(usize, f64)> {
        let h = self.record.spacing();
        if !(self.dt > 0.0) {
            return Err(Error::InvalidCurve(format!(
                "time step {} must be > 0",
                self.dt
            )));
        }
        let k = (h / self.dt).round().max(1.0) as usize;
        if ((k as f64) * self.dt - h).abs() > 1e-9 * h {
            return Err(Error::InvalidCurve(format!(
                "time step {} does not divide the record spacing {h}",
                self.dt
            )));
        }
        Ok((k, h / k as f64))
    }
}

/// Boundary band width as a fraction of the grid extent.
const BOUNDARY_BAND: f64 = 0.01;
/// Largest mass admitted in the boundary band.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// Solve the equation forward from `(s, nu)` to the horizon.
///
/// Degenerate diffusion with atomic data moves the atoms along RK4
/// characteristics; everything else runs the explicit finite-volume scheme
/// on `settings.grid` (atoms are first deposited on their nearest cells).
pub fn solve_forward(
    p: &Problem,
    s: f64,
    nu: &Measure,
    settings: &SolverSettings,
) -> Result<SolutionCurve> {
    if nu.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            left: nu.dim(),
            right: p.dim(),
        });
    }
    if (settings.record.horizon - p.horizon()).abs() > 1e-12 {
        return Err(Error::InvalidCurve(format!(
            "record grid horizon {} differs from the problem horizon {}",
            settings.record.horizon,
            p.horizon()
        )));
    }
    settings.record.index_of(s)?;
    if nu.is_atomic() && !nu.within(&p.domain_box) {
        return Err(Error::InvalidProblem(
            "initial datum has atoms outside the domain box".into(),
        ));
    }
    if p.coefficients.is_degenerate() && nu.is_atomic() {
        return characteristics::transport(p, s, nu, settings);
    }
    let grid = settings
        .grid
        .clone()
        .or_else(|| nu.grid().cloned())
        .ok_or_else(|| Error::InvalidCurve("a spatial grid is required for this problem".into()))?;
    let start = nu.deposit(&grid)?;
    let curve = grid_scheme::evolve(p, s, &start, &grid, settings)?;
    check_boundary_mass(&curve, &grid)?;
    Ok(curve)
}

fn check_boundary_mass(curve: &SolutionCurve, grid: &GridSpec) -> Result<()> {
    let d = grid.dim();
    let band: Vec<usize> = grid
        .cells()
        .iter()
        .map(|&n| ((n as f64 * BOUNDARY_BAND).ceil() as usize).max(1))
        .collect();
    let in_band = |i: usize| {
        let (ix, iy) = grid.unflat(i);
        let near = |k: usize, a: usize| k < band[a] || k + band[a] >= grid.cells()[a];
        near(ix, 0) || (d == 2 && near(iy, 1))
    };
    for (t, m) in curve.times().iter().zip(curve.marginals()) {
        let mass: f64 = m
            .weights()
            .iter()
            .enumerate()
            .filter(|(i, _)| in_band(*i))
            .map(|(_, w)| w)
            .sum();
        if mass > BOUNDARY_MASS_LIMIT {
            return Err(Error::BoundaryMass { mass, time: *t });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{integrate, wasserstein1, RidgeSpec, TestFunction};
    use crate::problem::preset;

    fn heat_settings(dx: f64, dt: f64, intervals: usize) -> SolverSettings {
        SolverSettings {
            dt,
            grid: Some(GridSpec::centered(&[0.0], 8.0, dx).unwrap()),
            record: TimeGrid::new(1.0, intervals).unwrap(),
        }
    }

    #[test]
    fn zero_preset_is_stationary() {
        let p = preset("zero").unwrap();
        let nu = Measure::dirac(&[0.5]).unwrap();
        let curve = solve_forward(&p, 0.0, &nu, &heat_settings(0.01, 1e-3, 10)).unwrap();
        for m in curve.marginals() {
            assert_eq!(wasserstein1(m, &nu).unwrap(), 0.0);
        }
        // On a grid as well.
        let grid = GridSpec::centered(&[0.0], 8.0, 0.01).unwrap();
        let g = nu.deposit(&grid).unwrap();
        let curve = solve_forward(&p, 0.0, &g, &heat_settings(0.01, 1e-3, 10)).unwrap();
        for m in curve.marginals() {
            assert_eq!(wasserstein1(m, &g).unwrap(), 0.0);
            assert!(wasserstein1(m, &nu).unwrap() < 1e-12);
        }
    }

    #[test]
    fn heat_second_moment_at_one() {
        let p = preset("heat").unwrap();
        let nu = Measure::dirac(&[0.0]).unwrap();
        let curve = solve_forward(&p, 0.0, &nu, &heat_settings(0.01, 1e-4, 100)).unwrap();
        let m2 = curve.terminal().second_moment();
        assert!((0.98..=1.02).contains(&m2), "{m2}");
        for m in curve.marginals() {
            assert!((m.total_mass() - 1.0).abs() < 1e-9);
            assert!(m.weights().iter().all(|&w| w >= 0.0));
        }
        assert_eq!(curve.provenance(), Provenance::Solver);
    }

    #[test]
    fn stability_violation_reports_stable_step() {
        let p = preset("heat").unwrap();
        let nu = Measure::dirac(&[0.0]).unwrap();
        match solve_forward(&p, 0.0, &nu, &heat_settings(0.01, 2e-4, 100)) {
            Err(Error::Stability { stable_dt, .. }) => assert!((stable_dt - 1e-4).abs() < 1e-12),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn ou_second_moment_decreases_early() {
        // Oracle: d/dt ∫x² dμ = ∫(1 − 2x tanh x) dμ at t = 0 for N(0,1),
        // by independent midpoint quadrature.
        let n = 160_000;
        let h = 16.0 / n as f64;
        let rate: f64 = (0..n)
            .map(|i| {
                let x = -8.0 + (i as f64 + 0.5) * h;
                (1.0 - 2.0 * x * x.tanh()) * (-0.5 * x * x).exp()
                    / (2.0 * std::f64::consts::PI).sqrt()
                    * h
            })
            .sum();
        assert!(rate < 0.0, "{rate}");

        let p = preset("ou_tanh").unwrap();
        let grid = GridSpec::centered(&[0.0], 8.0, 0.02).unwrap();
        let nu = Measure::gaussian(grid.clone(), &[0.0], 1.0).unwrap();
        let settings = SolverSettings {
            dt: 2e-4,
            grid: Some(grid),
            record: TimeGrid::new(1.0, 20).unwrap(),
        };
        let curve = solve_forward(&p, 0.0, &nu, &settings).unwrap();
        let m2: Vec<f64> = curve.marginals()[..=10]
            .iter()
            .map(|m| m.second_moment())
            .collect();
        for w in m2.windows(2) {
            assert!(w[1] < w[0], "{m2:?}");
        }
        let est = (m2[1] - m2[0]) / 0.05;
        assert!((est - rate).abs() < 0.05, "{est} vs {rate}");
    }

    #[test]
    fn degenerate_transport_follows_characteristics() {
        let p = preset("sqrt_branch").unwrap();
        let nu = Measure::dirac(&[0.25]).unwrap();
        let settings = SolverSettings {
            dt: 1e-3,
            grid: None,
            record: TimeGrid::new(1.0, 10).unwrap(),
        };
        let curve = solve_forward(&p, 0.0, &nu, &settings).unwrap();
        // x' = √x from 0.25: √x(t) = 0.5 + t/2.
        let x1 = curve.terminal().location(0)[0];
        assert!(
            (x1 - 1.0f64.min((0.5 + 0.5f64).powi(2))).abs() < 1e-9,
            "{x1}"
        );
        let nu0 = Measure::dirac(&[0.0]).unwrap();
        let stay = solve_forward(&p, 0.0, &nu0, &settings).unwrap();
        assert!(stay.marginals().iter().all(|m| m.location(0)[0] == 0.0));
    }

    #[test]
    fn restart_reproduces_the_tail_exactly() {
        let p = preset("ou_tanh").unwrap();
        let settings = SolverSettings {
            dt: 5e-4,
            grid: Some(GridSpec::centered(&[0.0], 8.0, 0.04).unwrap()),
            record: TimeGrid::new(1.0, 10).unwrap(),
        };
        let nu = Measure::dirac(&[0.3]).unwrap();
        let full = solve_forward(&p, 0.0, &nu, &settings).unwrap();
        let mid = full.marginal_at(0.5).unwrap().clone();
        let tail = solve_forward(&p, 0.5, &mid, &settings).unwrap();
        assert_eq!(tail.terminal(), full.terminal());
    }

    #[test]
    fn two_dimensional_heat_spreads_isotropically() {
        let c = crate::problem::Coefficients::new(
            2,
            1.0,
            |_, _| [[1.0, 0.0], [0.0, 1.0]],
            |_, _| [0.0; 2],
            1.0,
            0.0,
        )
        .unwrap()
        .time_homogeneous();
        let p = Problem::new(c, crate::measure::DomainBox::symmetric(2, 6.0), "heat2d").unwrap();
        let grid = GridSpec::centered(&[0.0, 0.0], 6.0, 0.1).unwrap();
        let settings = SolverSettings {
            dt: 2.5e-3,
            grid: Some(grid),
            record: TimeGrid::new(1.0, 4).unwrap(),
        };
        let nu = Measure::dirac(&[0.0, 0.0]).unwrap();
        let curve = solve_forward(&p, 0.0, &nu, &settings).unwrap();
        let m = curve.terminal();
        assert!(
            (m.second_moment() - 2.0).abs() < 0.02,
            "{}",
            m.second_moment()
        );
        let f = TestFunction::ridge(RidgeSpec::tanh(&[1.0, 0.0], 0.3));
        let g = TestFunction::ridge(RidgeSpec::tanh(&[0.0, 1.0], 0.3));
        assert!((integrate(m, &f).unwrap() - integrate(m, &g).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn small_box_trips_the_boundary_check() {
        let p = preset("heat").unwrap();
        let settings = SolverSettings {
            dt: 1e-3,
            grid: Some(GridSpec::centered(&[0.0], 1.0, 0.05).unwrap()),
            record: TimeGrid::new(1.0, 10).unwrap(),
        };
        let nu = Measure::dirac(&[0.0]).unwrap();
        assert!(matches!(
            solve_forward(&p, 0.0, &nu, &settings),
            Err(Error::BoundaryMass { .. })
        ));
    }
}

//! Discrete probability measures on one- and two-dimensional space.
//!
//! A [`Measure`] is either a set of weighted atoms or a cell-mass vector on a
//! uniform [`GridSpec`]. Grid weights are cell-averaged densities times the
//! cell volume, and their mass is located at the cell centres for every
//! pairing and metric computation.

mod io;
mod test_function;
mod wasserstein;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Fnv;

pub use io::{read_csv, write_csv};
pub use test_function::{Profile, RidgeSpec, TestFunction};
pub use wasserstein::{sliced_directions, wasserstein1, SLICED_DIRECTIONS};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// A point in at most [`MAX_DIM`] dimensions; unused trailing coordinates are zero.
pub type Point = [f64; MAX_DIM];

/// Tolerance on the total mass of a normalized measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Mass deficit above which implicit normalization is reported.
pub const DEFICIT_WARNING: f64 = 1e-9;

/// An axis-aligned box, one closed interval per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.len() > MAX_DIM {
            return Err(Error::InvalidProblem(format!(
                "domain box needs 1 or 2 axes, got lower {lower:?} upper {upper:?}"
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidProblem(format!(
                "empty domain box {lower:?}..{upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Nearest point of the box (constant extension of coefficients).
    pub fn clamp(&self, x: &[f64]) -> Point {
        let mut out = [0.0; MAX_DIM];
        for (i, v) in x.iter().enumerate() {
            out[i] = v.clamp(self.lower[i], self.upper[i]);
        }
        out
    }
}

/// Uniform Cartesian grid with square cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    origin: Vec<f64>,
    spacing: f64,
    cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, spacing: f64, cells: Vec<usize>) -> Result<Self> {
        if origin.len() != cells.len() || origin.is_empty() || origin.len() > MAX_DIM {
            return Err(Error::InvalidMeasure(format!(
                "grid needs matching origin/cells of dimension 1 or 2, got {} and {}",
                origin.len(),
                cells.len()
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "grid spacing {spacing} must be > 0"
            )));
        }
        if cells.contains(&0) {
            return Err(Error::InvalidMeasure(
                "grid needs at least one cell per axis".into(),
            ));
        }
        Ok(Self {
            origin,
            spacing,
            cells,
        })
    }

    /// Grid with an odd number of cells per axis whose middle cell is centred
    /// on `center`, covering at least `center ± half_width`.
    pub fn centered(center: &[f64], half_width: f64, spacing: f64) -> Result<Self> {
        let k = (half_width / spacing).round().max(0.0) as usize;
        let n = 2 * k + 1;
        let origin = center
            .iter()
            .map(|c| c - (k as f64 + 0.5) * spacing)
            .collect();
        Self::new(origin, spacing, vec![n; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Flat index of the multi-index `(ix, iy)`; x varies fastest.
    pub fn flat(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }

    pub fn unflat(&self, i: usize) -> (usize, usize) {
        (i % self.cells[0], i / self.cells[0])
    }

    pub fn center(&self, i: usize) -> Point {
        let (ix, iy) = self.unflat(i);
        let mut p = [0.0; MAX_DIM];
        p[0] = self.origin[0] + (ix as f64 + 0.5) * self.spacing;
        if self.dim() == 2 {
            p[1] = self.origin[1] + (iy as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// The box covered by the cells.
    pub fn bounds(&self) -> DomainBox {
        DomainBox {
            lower: self.origin.clone(),
            upper: self
                .origin
                .iter()
                .zip(&self.cells)
                .map(|(o, &n)| o + n as f64 * self.spacing)
                .collect(),
        }
    }

    /// Index of the cell whose centre is nearest to `x` (clamped to the grid).
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        let axis = |a: usize| {
            let r = ((x[a] - self.origin[a]) / self.spacing - 0.5).round();
            r.clamp(0.0, (self.cells[a] - 1) as f64) as usize
        };
        let ix = axis(0);
        let iy = if self.dim() == 2 { axis(1) } else { 0 };
        self.flat(ix, iy)
    }
}

/// Where the mass of a [`Measure`] sits.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Grid(GridSpec),
    Atoms { dim: usize, locations: Vec<Point> },
}

/// A discrete probability measure. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    support: Support,
    weights: Vec<f64>,
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::NonPositiveMass(total));
    }
    Ok(total)
}

/// Scale to unit mass unless already within [`MASS_TOLERANCE`].
fn auto_normalize(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    let total = check_weights(&weights)?;
    let deficit = (total - 1.0).abs();
    if deficit > DEFICIT_WARNING {
        log::warn!("normalizing measure with mass {total} (deficit {deficit:e})");
    }
    if deficit > MASS_TOLERANCE {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(weights)
}

fn cmp_point(a: &Point, b: &Point) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

impl Measure {
    /// Unit mass at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::atoms(x.len(), vec![x.to_vec()], vec![1.0])
    }

    /// Weighted atoms. Locations are stored in lexicographic order so that
    /// equal measures have equal representations.
    pub fn atoms(dim: usize, locations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidMeasure(format!(
                "dimension {dim} not in 1..=2"
            )));
        }
        if locations.len() != weights.len() || locations.is_empty() {
            return Err(Error::InvalidMeasure(format!(
                "{} locations for {} weights",
                locations.len(),
                weights.len()
            )));
        }
        let mut points = Vec::with_capacity(locations.len());
        for loc in &locations {
            if loc.len() != dim || loc.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom location {loc:?} is not a finite point of dimension {dim}"
                )));
            }
            let mut p = [0.0; MAX_DIM];
            p[..dim].copy_from_slice(loc);
            points.push(p);
        }
        Self::from_points(dim, points, weights)
    }

    pub(crate) fn from_points(dim: usize, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let weights = auto_normalize(weights)?;
        let n = weights.len();
        let mut pairs: Vec<(Point, f64)> = points.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| cmp_point(&a.0, &b.0).then(a.1.total_cmp(&b.1)));
        // Coincident atoms are merged so equal measures have equal keys.
        pairs.dedup_by(|later, kept| {
            let same = later.0 == kept.0;
            if same {
                kept.1 += later.1;
            }
            same
        });
        let (locations, mut weights): (Vec<Point>, Vec<f64>) = pairs.into_iter().unzip();
        if weights.len() < n {
            // Summed weights drift off 1 by rounding.
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Ok(Self {
            support: Support::Atoms { dim, locations },
            weights,
        })
    }

    /// Cell masses on `grid`, in flat cell order.
    pub fn on_grid(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for a grid of {} cells",
                weights.len(),
                grid.len()
            )));
        }
        let weights = auto_normalize(weights)?;
        Ok(Self {
            support: Support::Grid(grid),
            weights,
        })
    }

    /// Discretize a density: each cell receives its Simpson-rule average
    /// times the cell volume.
    pub fn from_density(grid: GridSpec, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let h = grid.spacing();
        let d = grid.dim();
        let nodes = [-0.5 * h, 0.0, 0.5 * h];
        let simpson = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
        let weights = (0..grid.len())
            .map(|i| {
                let c = grid.center(i);
                let mut acc = 0.0;
                if d == 1 {
                    for (dx, wx) in nodes.iter().zip(simpson) {
                        acc += wx * density(&[c[0] + dx]);
                    }
                } else {
                    for (dx, wx) in nodes.iter().zip(simpson) {
                        for (dy, wy) in nodes.iter().zip(simpson) {
                            acc += wx * wy * density(&[c[0] + dx, c[1] + dy]);
                        }
                    }
                }
                acc * grid.cell_volume()
            })
            .collect();
        Self::on_grid(grid, weights)
    }

    /// Isotropic Gaussian with the given mean and variance per axis, discretized on `grid`.
    pub fn gaussian(grid: GridSpec, mean: &[f64], variance: f64) -> Result<Self> {
        let mean = mean.to_vec();
        let d = grid.dim() as i32;
        let norm = (2.0 * std::f64::consts::PI * variance).powi(d).sqrt();
        Self::from_density(grid, move |x| {
            let r2: f64 = x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            (-0.5 * r2 / variance).exp() / norm
        })
    }

    /// Rescale to unit mass. Errors when the total mass is not positive.
    pub fn normalize(&self) -> Result<Self> {
        let total = check_weights(&self.weights)?;
        Ok(Self {
            support: self.support.clone(),
            weights: self.weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Construct without renormalizing. Used for weights that already carry
    /// an exact unit mass (for example when reading a file back).
    pub(crate) fn from_parts_unchecked(support: Support, weights: Vec<f64>) -> Result<Self> {
        let total = check_weights(&weights)?;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} is not 1"
            )));
        }
        Ok(Self { support, weights })
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        match &self.support {
            Support::Grid(g) => g.dim(),
            Support::Atoms { dim, .. } => *dim,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.support, Support::Atoms { .. })
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        match &self.support {
            Support::Grid(g) => Some(g),
            Support::Atoms { .. } => None,
        }
    }

    pub fn location(&self, i: usize) -> Point {
        match &self.support {
            Support::Grid(g) => g.center(i),
            Support::Atoms { locations, .. } => locations[i],
        }
    }

    /// `(location, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        (0..self.len()).map(move |i| (self.location(i), self.weights[i]))
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ g dμ` for a plain closure, without finiteness checks.
    pub fn expect(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.dim();
        self.iter().map(|(x, w)| w * g(&x[..d])).sum()
    }

    pub fn mean(&self) -> Point {
        let mut m = [0.0; MAX_DIM];
        for (x, w) in self.iter() {
            m[0] += w * x[0];
            m[1] += w * x[1];
        }
        m
    }

    /// `∫ |x|² dμ`.
    pub fn second_moment(&self) -> f64 {
        self.iter()
            .map(|(x, w)| w * (x[0] * x[0] + x[1] * x[1]))
            .sum()
    }

    /// Whether every atom (or the grid) lies inside `domain`.
    pub fn within(&self, domain: &DomainBox) -> bool {
        let d = self.dim();
        match &self.support {
            Support::Atoms { locations, .. } => locations.iter().all(|p| domain.contains(&p[..d])),
            Support::Grid(g) => (0..g.len())
                .filter(|&i| self.weights[i] > 0.0)
                .all(|i| domain.contains(&g.center(i)[..d])),
        }
    }

    /// Move every atom to its nearest cell centre on `grid`.
    pub fn deposit(&self, grid: &GridSpec) -> Result<Self> {
        if self.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: grid.dim(),
            });
        }
        if let Support::Grid(g) = &self.support {
            if g == grid {
                return Ok(self.clone());
            }
        }
        let mut weights = vec![0.0; grid.len()];
        let d = self.dim();
        for (x, w) in self.iter() {
            weights[grid.nearest_cell(&x[..d])] += w;
        }
        Self::on_grid(grid.clone(), weights)
    }

    /// Convex combination `Σ λ_i μ_i`. Grid components must share one grid;
    /// atomic components are concatenated.
    pub fn mixture(parts: &[(f64, &Measure)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidMeasure("empty mixture".into()))?
            .1;
        if parts.iter().any(|(l, _)| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidMeasure("mixture weights must be >= 0".into()));
        }
        let d = first.dim();
        for (_, m) in parts {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: m.dim(),
                });
            }
        }
        match &first.support {
            Support::Grid(g) => {
                let mut weights = vec![0.0; g.len()];
                for (l, m) in parts {
                    if m.grid() != Some(g) {
                        return Err(Error::InvalidMeasure(
                            "grid mixture components must share one grid".into(),
                        ));
                    }
                    for (acc, w) in weights.iter_mut().zip(&m.weights) {
                        *acc += l * w;
                    }
                }
                Self::on_grid(g.clone(), weights)
            }
            Support::Atoms { .. } => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for (l, m) in parts {
                    match &m.support {
                        Support::Atoms { locations, .. } => {
                            points.extend_from_slice(locations);
                            weights.extend(m.weights.iter().map(|w| l * w));
                        }
                        Support::Grid(_) => {
                            return Err(Error::InvalidMeasure(
                                "cannot mix atomic and grid measures".into(),
                            ))
                        }
                    }
                }
                Self::from_points(d, points, weights)
            }
        }
    }

    /// Stable content hash, rendered as 16 hex digits.
    pub fn key(&self) -> String {
        let mut h = Fnv::new();
        self.hash_into(&mut h);
        h.hex()
    }

    pub(crate) fn hash_into(&self, h: &mut Fnv) {
        match &self.support {
            Support::Grid(g) => {
                h.write_u64(1);
                for o in &g.origin {
                    h.write_f64(*o);
                }
                h.write_f64(g.spacing);
                for &n in &g.cells {
                    h.write_u64(n as u64);
                }
            }
            Support::Atoms { dim, locations } => {
                h.write_u64(2);
                h.write_u64(*dim as u64);
                for p in locations {
                    h.write_f64(p[0]);
                    h.write_f64(p[1]);
                }
            }
        }
        for w in &self.weights {
            h.write_f64(*w);
        }
    }
}

/// `∫ f dμ = Σ w_i f(x_i)`.
pub fn integrate(m: &Measure, f: &TestFunction) -> Result<f64> {
    let d = m.dim();
    let mut acc = 0.0;
    for (x, w) in m.iter() {
        let v = f.eval(&x[..d]);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                id: f.id().to_string(),
                point: x[..d].to_vec(),
            });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Alias of [`Measure::normalize`].
pub fn normalize(m: &Measure) -> Result<Measure> {
    m.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_integrates_tanh_to_zero() {
        let m = Measure::dirac(&[0.0]).unwrap();
        let f = TestFunction::ridge(RidgeSpec::tanh(&[1.0], 0.0));
        assert_eq!(integrate(&m, &f).unwrap(), 0.0);
    }

    #[test]
    fn constant_one_integrates_to_one() {
        let grid = GridSpec::centered(&[0.0], 2.0, 0.1).unwrap();
        let n = grid.len();
        let m = Measure::on_grid(grid, vec![1.0; n]).unwrap();
        let one = TestFunction::from_fn("one", 1, |_| 1.0, 1.0, 0.0, 0.0);
        assert!((integrate(&m, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_clipped_identity_matches_quadrature() {
        let grid = GridSpec::new(vec![-8.0], 0.01, vec![1600]).unwrap();
        let m = Measure::gaussian(grid, &[0.0], 1.0).unwrap();
        let f = TestFunction::from_fn("x_clipped", 1, |x| x[0].clamp(-8.0, 8.0), 8.0, 1.0, 0.0);
        // Independent oracle: midpoint quadrature of x φ(x) on [-8, 8].
        let n = 200_000;
        let h = 16.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let x = -8.0 + (i as f64 + 0.5) * h;
                x * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * h
            })
            .sum();
        let got = integrate(&m, &f).unwrap();
        assert!((got - oracle).abs() < 1e-3, "{got} vs {oracle}");
        assert!(got.abs() < 1e-3);
    }

    #[test]
    fn non_finite_evaluation_names_the_point() {
        let m = Measure::atoms(1, vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let f = TestFunction::from_fn("log", 1, |x| x[0].ln(), 1.0, 1.0, 1.0);
        match integrate(&m, &f) {
            Err(Error::Evaluation { id, point }) => {
                assert_eq!(id, "log");
                assert_eq!(point, vec![0.0]);
            }
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn normalize_examples() {
        let grid = GridSpec::new(vec![0.0], 1.0, vec![2]).unwrap();
        let raw = Measure {
            support: Support::Grid(grid.clone()),
            weights: vec![2.0, 2.0],
        };
        assert_eq!(raw.normalize().unwrap().weights(), &[0.5, 0.5]);

        let single = Measure {
            support: Support::Grid(GridSpec::new(vec![0.0], 1.0, vec![1]).unwrap()),
            weights: vec![1.0],
        };
        assert_eq!(single.normalize().unwrap().weights(), &[1.0]);

        let zero = Measure {
            support: Support::Grid(grid),
            weights: vec![0.0, 0.0],
        };
        assert!(matches!(zero.normalize(), Err(Error::NonPositiveMass(_))));
    }

    #[test]
    fn construction_rejects_negative_and_autonormalizes() {
        assert!(Measure::atoms(1, vec![vec![0.0]], vec![-1.0]).is_err());
        let m = Measure::atoms(1, vec![vec![1.0], vec![0.0]], vec![3.0, 1.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert_eq!(m.location(0)[0], 0.0);
    }

    #[test]
    fn deposit_and_mixture() {
        let grid = GridSpec::centered(&[0.0], 1.0, 0.01).unwrap();
        let d = Measure::dirac(&[0.5]).unwrap().deposit(&grid).unwrap();
        let i = d.weights().iter().position(|&w| w == 1.0).unwrap();
        assert!((grid.center(i)[0] - 0.5).abs() < 1e-12);

        let a = Measure::dirac(&[0.0]).unwrap();
        let b = Measure::dirac(&[1.0]).unwrap();
        let mix = Measure::mixture(&[(0.25, &a), (0.75, &b)]).unwrap();
        assert_eq!(mix.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn centered_grid_has_a_cell_at_the_centre() {
        let g = GridSpec::centered(&[0.0], 8.0, 0.01).unwrap();
        assert_eq!(g.len(), 1601);
        assert!(g.center(800)[0].abs() < 1e-12);
        assert_eq!(g.nearest_cell(&[0.0]), 800);
    }

    #[test]
    fn key_is_order_independent_for_atoms() {
        let a = Measure::atoms(1, vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let b = Measure::atoms(1, vec![vec![1.0], vec![0.0]], vec![0.5, 0.5]).unwrap();
        assert_eq!(a.key(), b.key());
    }
}

use serde::{Deserialize, Serialize};

use super::residual::ResidualCertificate;
use crate::error::{Error, Result};
use crate::measure::{wasserstein1, Measure};
use crate::util::Fnv;

/// How a curve was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Solver,
    Analytic,
    Particle,
    Glued,
    BranchingCatalog,
    Mixture,
}

/// A measure-valued curve on `[s, T]` sampled on a strictly increasing time
/// grid. Immutable once built.
#[derive(Clone, Debug)]
pub struct SolutionCurve {
    times: Vec<f64>,
    marginals: Vec<Measure>,
    provenance: Provenance,
    label: String,
    continuity_constant: f64,
    certificate: Option<ResidualCertificate>,
    key: String,
}

impl PartialEq for SolutionCurve {
    fn eq(&self, other: &Self) -> bool {
        self.times == other.times && self.marginals == other.marginals
    }
}

impl SolutionCurve {
    pub fn new(
        times: Vec<f64>,
        marginals: Vec<Measure>,
        provenance: Provenance,
        label: impl Into<String>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != marginals.len() {
            return Err(Error::InvalidCurve(format!(
                "{} times for {} marginals",
                times.len(),
                marginals.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve(
                "times must be strictly increasing".into(),
            ));
        }
        let d = marginals[0].dim();
        if let Some(m) = marginals.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                left: d,
                right: m.dim(),
            });
        }
        // C = max over adjacent samples of W1 / √Δt.
        let mut continuity_constant: f64 = 0.0;
        for k in 1..times.len() {
            let w = wasserstein1(&marginals[k - 1], &marginals[k])?;
            continuity_constant = continuity_constant.max(w / (times[k] - times[k - 1]).sqrt());
        }
        let key = Self::hash(&times, &marginals);
        Ok(Self {
            times,
            marginals,
            provenance,
            label: label.into(),
            continuity_constant,
            certificate: None,
            key,
        })
    }

    fn hash(times: &[f64], marginals: &[Measure]) -> String {
        let mut h = Fnv::new();
        h.write_u64(times.len() as u64);
        for (t, m) in times.iter().zip(marginals) {
            h.write_f64(*t);
            m.hash_into(&mut h);
        }
        h.hex()
    }

    pub fn with_certificate(mut self, c: ResidualCertificate) -> Self {
        self.certificate = Some(c);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn s(&self) -> f64 {
        self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn marginals(&self) -> &[Measure] {
        &self.marginals
    }

    pub fn initial(&self) -> &Measure {
        &self.marginals[0]
    }

    pub fn terminal(&self) -> &Measure {
        self.marginals.last().unwrap()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Hölder-½ constant `max W1(μ_{t_k}, μ_{t_{k+1}}) / √(t_{k+1} − t_k)`.
    pub fn continuity_constant(&self) -> f64 {
        self.continuity_constant
    }

    pub fn certificate(&self) -> Option<&ResidualCertificate> {
        self.certificate.as_ref()
    }

    /// Content hash of times and marginals (label and provenance excluded).
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Index of `t` among the sample times (tolerance 1e-9 relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.horizon().abs().max(1.0);
        let i = self.times.partition_point(|&u| u < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn marginal_at(&self, t: f64) -> Result<&Measure> {
        self.index_of(t)
            .map(|i| &self.marginals[i])
            .ok_or(Error::OffGrid { time: t })
    }

    /// Restriction to `[r, T]`; `r` must be a sample time.
    pub fn restrict(&self, r: f64) -> Result<SolutionCurve> {
        let i = self.index_of(r).ok_or(Error::OffGrid { time: r })?;
        let mut out = SolutionCurve::new(
            self.times[i..].to_vec(),
            self.marginals[i..].to_vec(),
            self.provenance,
            self.label.clone(),
        )?;
        out.certificate = self.certificate.clone();
        Ok(out)
    }

    /// Restriction to `[s, r]`; `r` must be a sample time.
    pub fn head(&self, r: f64) -> Result<SolutionCurve> {
        let i = self.index_of(r).ok_or(Error::OffGrid { time: r })?;
        SolutionCurve::new(
            self.times[..=i].to_vec(),
            self.marginals[..=i].to_vec(),
            self.provenance,
            self.label.clone(),
        )
    }

    /// `max_t W1(μ_t, other_t)` over common sample times.
    pub fn sup_distance(&self, other: &SolutionCurve) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut shared = 0;
        for (t, m) in self.times.iter().zip(&self.marginals) {
            if let Some(j) = other.index_of(*t) {
                worst = worst.max(wasserstein1(m, &other.marginals[j])?);
                shared += 1;
            }
        }
        if shared == 0 {
            return Err(Error::InvalidCurve("curves share no sample time".into()));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac_curve(xs: &[f64]) -> SolutionCurve {
        let times = (0..xs.len())
            .map(|i| i as f64 / (xs.len() - 1) as f64)
            .collect();
        let ms = xs.iter().map(|x| Measure::dirac(&[*x]).unwrap()).collect();
        SolutionCurve::new(times, ms, Provenance::Analytic, "test").unwrap()
    }

    #[test]
    fn rejects_unsorted_times() {
        let m = Measure::dirac(&[0.0]).unwrap();
        assert!(SolutionCurve::new(
            vec![0.0, 0.0],
            vec![m.clone(), m.clone()],
            Provenance::Solver,
            ""
        )
        .is_err());
        assert!(SolutionCurve::new(vec![0.0], vec![], Provenance::Solver, "").is_err());
    }

    #[test]
    fn continuity_constant_and_restrict() {
        let c = dirac_curve(&[0.0, 0.5, 0.5]);
        assert!((c.continuity_constant() - 0.5 / 0.5f64.sqrt()).abs() < 1e-15);
        let r = c.restrict(0.5).unwrap();
        assert_eq!(r.s(), 0.5);
        assert_eq!(r.times().len(), 2);
        assert_eq!(r.continuity_constant(), 0.0);
        assert!(c.restrict(0.3).is_err());
    }

    #[test]
    fn key_ignores_label() {
        let a = dirac_curve(&[0.0, 1.0]);
        let b = a.clone().with_label("other");
        assert_eq!(a.key(), b.key());
        assert_ne!(a.key(), dirac_curve(&[0.0, 2.0]).key());
    }
}

use crate::error::{Error, Result};
use crate::measure::wasserstein1;
use crate::solver::{Provenance, SolutionCurve};

/// Largest endpoint gap accepted by [`glue`].
pub const GLUE_TOLERANCE: f64 = 1e-9;

/// Follow `front` on `[s, r]`, then `back` on `[r, T]`. The glued marginal at
/// `r` is taken from `back`, so restricting the result to `r` returns `back`.
pub fn glue(front: &SolutionCurve, back: &SolutionCurve) -> Result<SolutionCurve> {
    let r = back.s();
    if (front.horizon() - r).abs() > 1e-12 {
        return Err(Error::InvalidCurve(format!(
            "front ends at {} but back starts at {r}",
            front.horizon()
        )));
    }
    let gap = wasserstein1(front.terminal(), back.initial())?;
    if gap > GLUE_TOLERANCE {
        return Err(Error::GlueMismatch { r, gap });
    }
    let n = front.times().len() - 1;
    let mut times = front.times()[..n].to_vec();
    times.extend_from_slice(back.times());
    let mut marginals = front.marginals()[..n].to_vec();
    marginals.extend_from_slice(back.marginals());
    SolutionCurve::new(
        times,
        marginals,
        Provenance::Glued,
        format!("glue[{}|{}]", front.label(), back.label()),
    )
}

/// Residual bound for a glued curve: a pair straddling `r` splits into one
/// pair per part, so the parts' residuals add (up to the endpoint gap,
/// which [`glue`] keeps at zero by reusing `back`'s marginal).
pub fn glue_residual_bound(front_residual: f64, back_residual: f64) -> f64 {
    front_residual + back_residual
}

/// Tail of `curve` on `[r, T]`; `r` must be a sample time.
pub fn restrict(curve: &SolutionCurve, r: f64) -> Result<SolutionCurve> {
    curve.restrict(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::problem::preset;
    use crate::solver::{standard_residual_family, weak_residual_all_pairs, TimeGrid};

    fn constant(x: f64, s: f64) -> SolutionCurve {
        let times = TimeGrid::new(1.0, 10).unwrap().times_from(s).unwrap();
        let m = Measure::dirac(&[x]).unwrap();
        SolutionCurve::new(
            times.clone(),
            vec![m; times.len()],
            Provenance::Analytic,
            "c",
        )
        .unwrap()
    }

    fn parabola(tau: f64) -> SolutionCurve {
        let times = TimeGrid::new(1.0, 100).unwrap().times_from(0.0).unwrap();
        let ms = times
            .iter()
            .map(|&t| Measure::dirac(&[((t - tau).max(0.0) / 2.0).powi(2)]).unwrap())
            .collect();
        SolutionCurve::new(times, ms, Provenance::Analytic, format!("tau={tau}")).unwrap()
    }

    #[test]
    fn glue_constant_curves() {
        let front = constant(0.0, 0.0).head(0.5).unwrap();
        let back = constant(0.0, 0.5);
        let g = glue(&front, &back).unwrap();
        assert_eq!(g.times().len(), 11);
        assert_eq!(g, constant(0.0, 0.0));
        assert_eq!(g.provenance(), Provenance::Glued);
    }

    #[test]
    fn stay_then_branch_is_the_late_branch() {
        let p = preset("sqrt_branch").unwrap();
        let front = parabola(2.0).head(0.5).unwrap();
        let back = parabola(0.5).restrict(0.5).unwrap();
        let g = glue(&front, &back).unwrap();
        assert_eq!(g.terminal().location(0)[0], 0.0625);
        assert_eq!(g, parabola(0.5));
        let fs = standard_residual_family(1);
        let rf = weak_residual_all_pairs(&front, &p, &fs).unwrap().value;
        let rb = weak_residual_all_pairs(&back, &p, &fs).unwrap().value;
        let rg = weak_residual_all_pairs(&g, &p, &fs).unwrap().value;
        assert!(rg <= glue_residual_bound(rf, rb) + 1e-15);
        assert_eq!(restrict(&g, 0.5).unwrap(), back);
    }

    #[test]
    fn mismatch_reports_gap() {
        let front = constant(0.0, 0.0).head(0.5).unwrap();
        let back = constant(1.0, 0.5);
        match glue(&front, &back) {
            Err(Error::GlueMismatch { gap, .. }) => assert_eq!(gap, 1.0),
            other => panic!("{other:?}"),
        }
        assert!(restrict(&constant(0.0, 0.0), 0.37).is_err());
    }
}

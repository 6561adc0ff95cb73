use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pair `(function index, checkpoint index)`.
pub type Pair = (usize, usize);

/// Bijective ordering of `{0..N} × Q` driving the selection. The sequence
/// for a start `s` is the subsequence of pairs whose checkpoint is `≥ s`, so
/// later starts always see a deletion of earlier starts' orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    functions: usize,
    checkpoints: Vec<f64>,
    order: Vec<Pair>,
}

impl Enumeration {
    pub fn from_order(functions: usize, checkpoints: Vec<f64>, order: Vec<Pair>) -> Result<Self> {
        if functions == 0 || checkpoints.is_empty() {
            return Err(Error::Enumeration(
                "need at least one function and checkpoint".into(),
            ));
        }
        if checkpoints.iter().any(|t| !t.is_finite())
            || checkpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Enumeration(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        let q = checkpoints.len();
        if order.len() != functions * q {
            return Err(Error::Enumeration(format!(
                "order has {} pairs, expected {}",
                order.len(),
                functions * q
            )));
        }
        let mut seen = vec![false; functions * q];
        for &(n, j) in &order {
            if n >= functions || j >= q {
                return Err(Error::Enumeration(format!("pair ({n}, {j}) out of range")));
            }
            if std::mem::replace(&mut seen[n * q + j], true) {
                return Err(Error::Enumeration(format!("pair ({n}, {j}) repeated")));
            }
        }
        Ok(Self {
            functions,
            checkpoints,
            order,
        })
    }

    /// Diagonal order: by `n + j`, then by `j`.
    pub fn diagonal(functions: usize, checkpoints: Vec<f64>) -> Result<Self> {
        let q = checkpoints.len();
        let mut order: Vec<Pair> = (0..functions)
            .flat_map(|n| (0..q).map(move |j| (n, j)))
            .collect();
        order.sort_by_key(|&(n, j)| (n + j, j));
        Self::from_order(functions, checkpoints, order)
    }

    /// Same order with `pair` moved to the front.
    pub fn with_first(&self, pair: Pair) -> Result<Self> {
        let pos =
            self.order.iter().position(|&p| p == pair).ok_or_else(|| {
                Error::Enumeration(format!("pair {pair:?} not in the enumeration"))
            })?;
        let mut order = self.order.clone();
        let p = order.remove(pos);
        order.insert(0, p);
        Ok(Self {
            order,
            ..self.clone()
        })
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    pub fn order(&self) -> &[Pair] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.checkpoints.last().unwrap().abs().max(1.0)
    }

    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        let tol = self.tolerance();
        self.checkpoints.iter().position(|&q| (q - t).abs() <= tol)
    }

    /// `m^s_k`: the pairs with checkpoint `≥ s`, in order.
    pub fn for_start(&self, s: f64) -> Vec<Pair> {
        let tol = self.tolerance();
        self.order
            .iter()
            .copied()
            .filter(|&(_, j)| self.checkpoints[j] >= s - tol)
            .collect()
    }

    /// Checkpoints `≥ s`.
    pub fn checkpoints_from(&self, s: f64) -> Vec<f64> {
        let tol = self.tolerance();
        self.checkpoints
            .iter()
            .copied()
            .filter(|&q| q >= s - tol)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_order() {
        let e = Enumeration::diagonal(3, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(
            &e.order()[..6],
            &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert_eq!(
            e.for_start(0.5),
            vec![(0, 1), (1, 1), (0, 2), (2, 1), (1, 2), (2, 2)]
        );
    }

    #[test]
    fn rejects_non_bijective_orders() {
        assert!(Enumeration::from_order(2, vec![0.0], vec![(0, 0), (0, 0)]).is_err());
        assert!(Enumeration::from_order(2, vec![0.0], vec![(0, 0)]).is_err());
        assert!(Enumeration::from_order(1, vec![0.0], vec![(1, 0)]).is_err());
        assert!(Enumeration::from_order(1, vec![0.5, 0.0], vec![(0, 0), (0, 1)]).is_err());
    }

    proptest! {
        #[test]
        fn later_starts_see_subsequences(
            n in 1usize..5, q in 1usize..5, first in 0usize..25, a in 0usize..5, b in 0usize..5
        ) {
            let cps: Vec<f64> = (0..q).map(|j| j as f64 / q as f64).collect();
            let mut e = Enumeration::diagonal(n, cps.clone()).unwrap();
            let pair = e.order()[first % e.len()];
            e = e.with_first(pair).unwrap();
            prop_assert_eq!(e.order()[0], pair);
            let (s, r) = (cps[a.min(b) % q].min(cps[a.max(b) % q]), cps[a.min(b) % q].max(cps[a.max(b) % q]));
            let early = e.for_start(s);
            let late = e.for_start(r);
            // `late` is `early` with the pairs before r deleted.
            let filtered: Vec<Pair> = early.iter().copied().filter(|&(_, j)| cps[j] >= r).collect();
            prop_assert_eq!(late, filtered);
        }
    }
}

//! Grid search for parameters where a network misses a target function.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Gnn;
use crate::graph::{make_family, FamilyKind, FamilySpec};

/// Geometric ladder `1, ..., max` in each parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBudget {
    pub k_max: u64,
    pub c_max: u64,
    /// Ratio between consecutive ladder rungs (at least one step of 1).
    pub factor: f64,
}

impl Default for GridBudget {
    fn default() -> Self {
        Self {
            k_max: 10_000,
            c_max: 10_000,
            factor: 2.0,
        }
    }
}

/// `1 = v_0 < v_1 < ... = max` with `v_{i+1} = max(v_i + 1, ceil(factor v_i))`.
pub fn ladder(max: u64, factor: f64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = 1u64;
    while v < max {
        out.push(v);
        let grown = (v as f64 * factor).ceil();
        v = if grown.is_finite() && grown < u64::MAX as f64 {
            (grown as u64).max(v + 1)
        } else {
            max
        };
    }
    if max >= 1 {
        out.push(max);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub k: u64,
    pub c: u64,
    pub output: f64,
    pub target: f64,
    pub gap: f64,
}

/// First `(k, c)` in lexicographic ladder order where the first output
/// coordinate at the family's target vertex misses `target(k, c)` by more
/// than `eps`. Grid points are evaluated in parallel; the result does not
/// depend on the thread count.
pub fn counterexample_search(
    gnn: &Gnn,
    family: FamilyKind,
    target: impl Fn(u64, u64) -> f64 + Sync,
    eps: f64,
    budget: GridBudget,
) -> Result<Option<Witness>> {
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be nonnegative, got {eps}")));
    }
    if !(budget.factor > 1.0) {
        return Err(Error::invalid("ladder factor must exceed 1"));
    }
    let ks = ladder(budget.k_max, budget.factor);
    let cs = if family.takes_second() {
        ladder(budget.c_max, budget.factor)
    } else {
        vec![0]
    };
    let grid: Vec<(u64, u64)> = ks
        .iter()
        .flat_map(|&k| cs.iter().map(move |&c| (k, c)))
        .collect();
    grid.par_iter()
        .map(|&(k, c)| -> Result<Option<Witness>> {
            let g = make_family(FamilySpec::new(family, k, c)?)?;
            let output = gnn.output_at_target(&g)?[0];
            let t = target(k, c);
            let gap = (output - t).abs();
            Ok((gap > eps || gap.is_nan()).then_some(Witness {
                k,
                c,
                output,
                target: t,
                gap,
            }))
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        })
        .transpose()
        .map(Option::flatten)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::Aggregation;
    use crate::neural::Fnn;

    #[test]
    fn ladder_shape() {
        assert_eq!(ladder(10, 2.0), vec![1, 2, 4, 8, 10]);
        assert_eq!(ladder(1, 2.0), vec![1]);
        assert_eq!(ladder(5, 1.1), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn constant_zero_misses_c() {
        let zero = Fnn::linear(vec![vec![0.0, 0.0]], vec![0.0]).unwrap();
        let gnn = Gnn::uniform(vec![zero], Aggregation::Sum).unwrap();
        let w = counterexample_search(&gnn, FamilyKind::StarUc, |_, c| c as f64, 1.0, GridBudget::default())
            .unwrap()
            .unwrap();
        assert_eq!((w.k, w.c), (1, 2));
        assert_eq!(w.gap, 2.0);
    }

    #[test]
    fn exact_mean_has_no_witness() {
        let proj = Fnn::linear(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        let gnn = Gnn::uniform(vec![proj], Aggregation::Mean).unwrap();
        let budget = GridBudget {
            k_max: 10_000,
            c_max: 10_000,
            factor: 4.0,
        };
        let found = counterexample_search(&gnn, FamilyKind::StarUc, |_, c| c as f64, 1e-9, budget).unwrap();
        assert!(found.is_none());
    }
}

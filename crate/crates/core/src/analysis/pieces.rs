//! Piece counting for outputs that are piecewise polynomial in the family size.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::Gnn;
use crate::graph::{make_family, FamilyKind, FamilySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceReport {
    /// Theoretical upper bound on the piece count, when a network is known.
    pub bound: Option<u128>,
    pub detected_pieces: usize,
    /// Largest polynomial degree actually needed by a detected piece.
    pub max_degree_used: usize,
    pub sample_range: (i64, i64),
}

/// `((d+1)^l)^m` with `d` the largest FNN in-degree, `l` the largest FNN depth
/// and `m` the number of layers. Every aggregation kind in this crate is a
/// uniform polynomial aggregation, so all gnns qualify.
pub fn piece_bound(gnn: &Gnn) -> Result<u128> {
    let d = gnn
        .layers()
        .iter()
        .map(|l| l.fnn().max_in_degree())
        .max()
        .unwrap_or(0) as u128;
    let l = gnn.layers().iter().map(|l| l.fnn().depth()).max().unwrap_or(0) as u32;
    let m = gnn.depth() as u32;
    (d + 1)
        .checked_pow(l)
        .and_then(|x| x.checked_pow(m))
        .ok_or_else(|| Error::invalid(format!("piece bound ((d+1)^l)^m overflows for d={d}, l={l}, m={m}")))
}

/// Relative tolerance of the finite-difference kink test.
pub const PIECE_REL_TOL: f64 = 1e-6;
const PIECE_ABS_TOL: f64 = 1e-12;

fn nth_difference(window: &[f64]) -> f64 {
    let mut w = window.to_vec();
    for len in (1..w.len()).rev() {
        for i in 0..len {
            w[i] = w[i + 1] - w[i];
        }
    }
    w[0]
}

/// Whether `window` (of length `r + 2`) has a vanishing `(r+1)`-th difference.
fn fits(window: &[f64]) -> bool {
    let scale = window.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let order = window.len() - 1;
    let tol = PIECE_REL_TOL * scale * 2f64.powi(order as i32) + PIECE_ABS_TOL;
    nth_difference(window).abs() <= tol
}

fn degree_of(piece: &[f64], max_degree: usize) -> usize {
    (0..=max_degree)
        .find(|&r| piece.len() < r + 2 || piece.windows(r + 2).all(fits))
        .unwrap_or(max_degree)
}

/// Splits samples `values[i] = f(k_lo + i)` into the fewest consecutive runs
/// that each lie on a polynomial of degree at most `max_degree`.
pub fn detect_pieces(k_lo: i64, values: &[f64], max_degree: usize) -> Result<PieceReport> {
    let needed = 2 * (max_degree + 2) + 1;
    if values.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: values.len(),
        });
    }
    let w = max_degree + 2;
    let mut starts = vec![0usize];
    for e in 0..values.len() {
        let s = *starts.last().expect("nonempty");
        if e + 1 >= s + w && !fits(&values[e + 1 - w..=e]) {
            starts.push(e);
        }
    }
    let mut max_degree_used = 0;
    for (i, &s) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(values.len());
        max_degree_used = max_degree_used.max(degree_of(&values[s..end], max_degree));
    }
    Ok(PieceReport {
        bound: None,
        detected_pieces: starts.len(),
        max_degree_used,
        sample_range: (k_lo, k_lo + values.len() as i64 - 1),
    })
}

/// Samples the first output coordinate at the family's target vertex for
/// every `k` in `ks` (second parameter fixed at `c`), detects its pieces and
/// attaches the network's theoretical bound.
pub fn pieces_on_family(
    gnn: &Gnn,
    family: FamilyKind,
    ks: RangeInclusive<u64>,
    c: u64,
    max_degree: usize,
) -> Result<PieceReport> {
    let k_lo = *ks.start();
    let values = ks
        .map(|k| {
            let g = make_family(FamilySpec::new(family, k, c)?)?;
            Ok(gnn.output_at_target(&g)?[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = detect_pieces(k_lo as i64, &values, max_degree)?;
    report.bound = Some(piece_bound(gnn)?);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::Aggregation;
    use crate::neural::Fnn;

    fn sample(f: impl Fn(f64) -> f64) -> Vec<f64> {
        (1..=50).map(|k| f(k as f64)).collect()
    }

    #[test]
    fn quadratic_is_one_piece() {
        let r = detect_pieces(1, &sample(|k| k * k), 2).unwrap();
        assert_eq!(r.detected_pieces, 1);
        assert_eq!(r.max_degree_used, 2);
        assert_eq!(r.sample_range, (1, 50));
    }

    #[test]
    fn single_kink_is_two_pieces() {
        let r = detect_pieces(1, &sample(|k| (k - 10.0).max(0.0) * k), 2).unwrap();
        assert_eq!(r.detected_pieces, 2);
        let r = detect_pieces(1, &sample(|k| (k - 10.0).abs() + (k - 30.0).max(0.0)), 1).unwrap();
        assert_eq!(r.detected_pieces, 3);
        assert_eq!(r.max_degree_used, 1);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            detect_pieces(1, &[1.0; 8], 2),
            Err(Error::TooFewSamples { needed: 9, got: 8 })
        ));
    }

    #[test]
    fn bound_formula() {
        let proj = Fnn::linear(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        let one = Gnn::uniform(vec![proj], Aggregation::Sum).unwrap();
        assert_eq!(piece_bound(&one).unwrap(), 2);
        let mut rng = crate::util::seeded_rng(0);
        let g = Gnn::random(1, &[2, 1], &[vec![3], vec![1]], &[vec![Aggregation::Max], vec![Aggregation::Sum]], 1.0, 1.0, &mut rng)
            .unwrap();
        // dense in-degrees are at most 4; depth 2; two layers
        assert!(piece_bound(&g).unwrap() <= 625);
        assert!(piece_bound(&g).unwrap() >= 16);
    }
}

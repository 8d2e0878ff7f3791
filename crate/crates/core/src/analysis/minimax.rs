//! Best uniform polynomial approximation on consecutive integers.

use serde::{Deserialize, Serialize};

use super::lp::minimize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// `max_y |p*(y) - f(y)|` for the returned minimizer.
    pub gap: f64,
    /// Coefficients of `p*` in powers of `(y - x)`, lowest degree first.
    pub best_poly: Vec<f64>,
    pub points: Vec<i64>,
}

impl GapResult {
    /// Evaluates the minimizer at `y`.
    pub fn eval(&self, y: i64) -> f64 {
        let t = (y - self.points[0]) as f64;
        self.best_poly.iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }
}

/// Smallest achievable max-error of a degree-`n` polynomial against
/// `values[i] = f(x + i)`, solved as a linear program.
pub fn minimax_gap(values: &[f64], x: i64, n: usize) -> Result<GapResult> {
    let kn = values.len();
    if kn < n + 2 {
        return Err(Error::TooFewSamples {
            needed: n + 2,
            got: kn,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("minimax values must be finite"));
    }
    // variables: c_j^+ (n+1), c_j^- (n+1), t
    let nv = 2 * (n + 1) + 1;
    let mut a = Vec::with_capacity(2 * kn);
    let mut b = Vec::with_capacity(2 * kn);
    for (i, &f) in values.iter().enumerate() {
        let mut pw = 1.0;
        let mut up = vec![0.0; nv];
        let mut down = vec![0.0; nv];
        for j in 0..=n {
            up[j] = pw;
            up[n + 1 + j] = -pw;
            down[j] = -pw;
            down[n + 1 + j] = pw;
            pw *= i as f64;
        }
        up[nv - 1] = -1.0;
        down[nv - 1] = -1.0;
        a.push(up);
        b.push(f);
        a.push(down);
        b.push(-f);
    }
    let mut cost = vec![0.0; nv];
    cost[nv - 1] = 1.0;
    let sol = minimize(&cost, &a, &b)?;
    let best_poly: Vec<f64> = (0..=n).map(|j| sol.x[j] - sol.x[n + 1 + j]).collect();
    let points: Vec<i64> = (0..kn as i64).map(|i| x + i).collect();
    let mut result = GapResult {
        gap: 0.0,
        best_poly,
        points,
    };
    result.gap = values
        .iter()
        .enumerate()
        .map(|(i, &f)| (result.eval(x + i as i64) - f).abs())
        .fold(0.0, f64::max);
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Right end of the certified range `[0..t]`.
    pub t: i64,
    /// Smallest per-interval gap.
    pub delta: f64,
    pub gaps: Vec<f64>,
}

/// Gap below which an interval counts as exactly polynomial.
pub const ZERO_GAP: f64 = 1e-9;

/// Splits `[0..(k_n-1) q]` into `q` intervals of `k_n` points sharing their
/// endpoints and returns the smallest minimax gap among them. Any `q`-piece
/// degree-`n` piecewise polynomial misses `f` by at least `delta` somewhere.
pub fn scan_gap(f: impl Fn(i64) -> f64, q: usize, n: usize, kn: usize) -> Result<ScanResult> {
    if q == 0 {
        return Err(Error::invalid("scan needs at least one interval"));
    }
    if kn < n + 2 {
        return Err(Error::TooFewSamples { needed: n + 2, got: kn });
    }
    let step = (kn - 1) as i64;
    let mut gaps = Vec::with_capacity(q);
    for i in 0..q as i64 {
        let start = step * i;
        let values: Vec<f64> = (start..start + kn as i64).map(&f).collect();
        let r = minimax_gap(&values, start, n)?;
        if r.gap <= ZERO_GAP {
            return Err(Error::NoCertificate(format!(
                "f agrees with a degree-{n} polynomial on {start}..={}",
                start + step
            )));
        }
        gaps.push(r.gap);
    }
    Ok(ScanResult {
        t: step * q as i64 + 1,
        delta: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        gaps,
    })
}

/// Default interval length for degree `n`.
pub fn default_kn(n: usize) -> usize {
    n + 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_of_two() {
        let r = minimax_gap(&[1.0, 2.0, 4.0], 0, 1).unwrap();
        assert!((r.gap - 0.25).abs() < 1e-12);
        assert!((r.best_poly[0] - 0.75).abs() < 1e-12);
        assert!((r.best_poly[1] - 1.5).abs() < 1e-12);
        assert_eq!(r.points, vec![0, 1, 2]);
    }

    #[test]
    fn exact_line_has_zero_gap() {
        let r = minimax_gap(&[3.0, 5.0, 7.0], 10, 1).unwrap();
        assert!(r.gap < 1e-12);
        assert!((r.eval(12) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn scan_examples() {
        let s = scan_gap(|y| 2f64.powi(y as i32), 1, 1, 3).unwrap();
        assert_eq!(s.t, 3);
        assert!((s.delta - 0.25).abs() < 1e-12);
        assert!(matches!(scan_gap(|y| 3.0 * y as f64 - 1.0, 3, 1, 3), Err(Error::NoCertificate(_))));
        let s = scan_gap(|y| 2f64.powi(y as i32), 2, 1, 3).unwrap();
        assert_eq!(s.t, 5);
        assert!((s.delta - 0.25).abs() < 1e-12);
        assert!((s.gaps[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(minimax_gap(&[1.0, 2.0], 0, 1).is_err());
    }
}

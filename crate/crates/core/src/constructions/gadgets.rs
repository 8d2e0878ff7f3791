use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Aggregation, Gnn, GnnLayer};
use crate::neural::{Activation, DenseLayer, Fnn};

/// Threshold indicator parameters: position `s`, interval `a`, dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub s: f64,
    pub a: f64,
    pub d: usize,
}

impl IndicatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a <= self.s && self.s <= 1.0) {
            return Err(Error::invalid(format!(
                "indicator needs 0 < a <= s <= 1, got s={}, a={}",
                self.s, self.a
            )));
        }
        if self.d == 0 {
            return Err(Error::invalid("indicator dimension must be positive"));
        }
        Ok(())
    }
}

/// Smallest integer `q` with `1/q < eps`.
pub fn resolution_for(eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("tolerance must be positive, got {eps}")));
    }
    let mut q = (1.0 / eps).floor();
    if !(q < 1e12) {
        return Err(Error::invalid(format!("tolerance {eps} needs too many gadget copies")));
    }
    q = q.max(1.0);
    while 1.0 / q >= eps {
        q += 1.0;
    }
    Ok(q as usize)
}

/// First layer shared by the mean gadgets: `(x, agg) -> (1, x)`.
fn one_and_self(d: usize) -> Result<GnnLayer> {
    let mut rows = vec![vec![0.0; 2 * d]; d + 1];
    for i in 0..d {
        rows[i + 1][i] = 1.0;
    }
    let mut bias = vec![0.0; d + 1];
    bias[0] = 1.0;
    GnnLayer::new(Fnn::linear(rows, bias)?, vec![Aggregation::Sum])
}

/// Hidden units of one trapezoid on a coordinate. The summed input carries
/// `n` at column `n_col` and the summed coordinate at `y_col`; with
/// `z = (s n - Y) / a` the units are `ReLU(z), ReLU(z-1), ReLU(z-n-1), ReLU(z-n)`
/// and the trapezoid is `u0 - u1 + u2 - u3`. `s_over_a` and `inv_a` are passed
/// separately so integer ratios stay exact.
pub(crate) fn trapezoid_units(
    width: usize,
    n_col: usize,
    y_col: usize,
    s_over_a: f64,
    inv_a: f64,
    rows: &mut Vec<Vec<f64>>,
    bias: &mut Vec<f64>,
) {
    for (n_coef, b) in [(s_over_a, 0.0), (s_over_a, -1.0), (s_over_a - 1.0, -1.0), (s_over_a - 1.0, 0.0)] {
        let mut r = vec![0.0; width];
        r[n_col] = n_coef;
        r[y_col] = -inv_a;
        rows.push(r);
        bias.push(b);
    }
}

pub(crate) const TRAPEZOID_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

/// Two-layer Sum-GNN whose output at `v` is, per coordinate, the trapezoid
/// indicator of `avg(v)` with position `s` and interval `a`.
pub fn build_indicator(spec: IndicatorSpec) -> Result<Gnn> {
    spec.validate()?;
    let d = spec.d;
    let p = d + 1;
    let width = 2 * p;
    let (mut rows, mut bias) = (Vec::new(), Vec::new());
    for i in 0..d {
        trapezoid_units(width, p, p + 1 + i, spec.s / spec.a, 1.0 / spec.a, &mut rows, &mut bias);
    }
    let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;
    let mut out = vec![vec![0.0; 4 * d]; d];
    for (i, row) in out.iter_mut().enumerate() {
        row[4 * i..4 * i + 4].copy_from_slice(&TRAPEZOID_SIGNS);
    }
    let out = DenseLayer::from_rows(out, vec![0.0; d], Activation::Identity)?;
    let second = GnnLayer::new(Fnn::new(vec![hidden, out])?, vec![Aggregation::Sum])?;
    Gnn::new(vec![one_and_self(d)?, second], None)
}

/// Mean approximator at resolution `q`: `avg(v) <= out <= avg(v) + 1/q` for
/// features in `[0,1]^d`.
pub fn build_mean_approx_q(q: usize, d: usize) -> Result<Gnn> {
    if q == 0 || d == 0 {
        return Err(Error::invalid("mean approximator needs q >= 1 and d >= 1"));
    }
    let p = d + 1;
    let width = 2 * p;
    let inv_a = q as f64;
    let (mut rows, mut bias) = (Vec::new(), Vec::new());
    for i in 0..d {
        for l in 1..=q + 1 {
            // s_l = l a, so s_l / a = l exactly
            trapezoid_units(width, p, p + 1 + i, l as f64, inv_a, &mut rows, &mut bias);
        }
    }
    let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;
    let per_coord = 4 * (q + 1);
    let mut out = vec![vec![0.0; per_coord * d]; d];
    for (i, row) in out.iter_mut().enumerate() {
        for l in 1..=q + 1 {
            let s = l as f64 / inv_a;
            let base = i * per_coord + 4 * (l - 1);
            for (k, sign) in TRAPEZOID_SIGNS.iter().enumerate() {
                row[base + k] = sign * s;
            }
        }
    }
    let out = DenseLayer::from_rows(out, vec![0.0; d], Activation::Identity)?;
    let second = GnnLayer::new(Fnn::new(vec![hidden, out])?, vec![Aggregation::Sum])?;
    Gnn::new(vec![one_and_self(d)?, second], None)
}

/// Mean approximator within `eps` (resolution: smallest `q` with `1/q < eps`).
pub fn build_mean_approx(eps: f64, d: usize) -> Result<Gnn> {
    build_mean_approx_q(resolution_for(eps)?, d)
}

/// Max approximator at resolution `q`: `max(v) <= out <= max(v) + 1/q` for
/// features in `[0,1]^d`. The first layer writes every coordinate as `q`
/// buckets of width `1/q`; the second caps each summed bucket at `1/q`.
pub fn build_max_approx_q(q: usize, d: usize) -> Result<Gnn> {
    if q == 0 || d == 0 {
        return Err(Error::invalid("max approximator needs q >= 1 and d >= 1"));
    }
    let a = 1.0 / q as f64;
    let dq = d * q;
    let (mut rows, mut bias) = (Vec::new(), Vec::new());
    for i in 0..d {
        for l in 1..=q {
            for shift in [l - 1, l] {
                let mut r = vec![0.0; 2 * d];
                r[i] = 1.0;
                rows.push(r);
                bias.push(-(shift as f64) * a);
            }
        }
    }
    let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;
    let mut out = vec![vec![0.0; 2 * dq]; dq];
    for (b, row) in out.iter_mut().enumerate() {
        row[2 * b] = 1.0;
        row[2 * b + 1] = -1.0;
    }
    let out = DenseLayer::from_rows(out, vec![0.0; dq], Activation::Identity)?;
    let first = GnnLayer::new(Fnn::new(vec![hidden, out])?, vec![Aggregation::Sum])?;

    let (mut rows, mut bias) = (Vec::new(), Vec::new());
    for b in 0..dq {
        for cut in [0.0, -a] {
            let mut r = vec![0.0; 2 * dq];
            r[dq + b] = 1.0;
            rows.push(r);
            bias.push(cut);
        }
    }
    let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;
    let mut out = vec![vec![0.0; 2 * dq]; d];
    for (i, row) in out.iter_mut().enumerate() {
        for l in 0..q {
            let b = i * q + l;
            row[2 * b] = 1.0;
            row[2 * b + 1] = -1.0;
        }
    }
    let out = DenseLayer::from_rows(out, vec![0.0; d], Activation::Identity)?;
    let second = GnnLayer::new(Fnn::new(vec![hidden, out])?, vec![Aggregation::Sum])?;
    Gnn::new(vec![first, second], None)
}

/// Max approximator within `eps`.
pub fn build_max_approx(eps: f64, d: usize) -> Result<Gnn> {
    build_max_approx_q(resolution_for(eps)?, d)
}

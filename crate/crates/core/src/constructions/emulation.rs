use serde::{Deserialize, Serialize};

use super::gadgets::{trapezoid_units, TRAPEZOID_SIGNS};
use crate::error::{Error, Result};
use crate::gnn::{Aggregation, Gnn, GnnLayer};
use crate::neural::{Activation, DenseLayer, Fnn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationReport {
    pub eps: f64,
    pub eps_hat: f64,
    /// Largest Lipschitz bound over the source FNNs.
    pub a: f64,
    /// Largest source layer input dimension.
    pub d: usize,
    /// Source depth; the compiled network has `2m` layers.
    pub m: usize,
    /// Node count of the compiled network.
    pub size_built: usize,
    /// Hidden units spent on aggregation gadgets.
    pub gadget_units: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    /// Refuse to build more gadget units than this.
    pub max_gadget_units: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            max_gadget_units: 5_000_000,
        }
    }
}

/// Per-gadget tolerance for a source with Lipschitz bound `a`, layer input
/// dimension `d` and depth `m`.
pub fn eps_hat(eps: f64, a: f64, d: usize, m: usize) -> f64 {
    let ad = a * d as f64;
    if ad == 0.0 {
        return eps;
    }
    let r = 2.0 * ad;
    if r == 1.0 {
        eps / (m as f64 * ad)
    } else {
        eps * (1.0 - r) / (ad * (1.0 - r.powi(m as i32)))
    }
}

fn source_kind(source: &Gnn) -> Result<Aggregation> {
    match source.uniform_aggregation() {
        Some(a @ (Aggregation::Mean | Aggregation::Max)) if source.layers().iter().all(|l| l.aggs().len() == 1) => {
            Ok(a.clone())
        }
        _ => Err(Error::Unsupported(
            "source must use a single mean or a single max aggregation in every layer".into(),
        )),
    }
}

fn lipschitz_and_dim(source: &Gnn) -> (f64, usize) {
    let a = source
        .layers()
        .iter()
        .map(|l| l.fnn().lipschitz_upper())
        .fold(0.0, f64::max);
    let d = source.layers().iter().map(GnnLayer::input_dim).max().unwrap_or(0);
    (a, d)
}

/// `(2 d a)^m` for a Mean-GNN or Max-GNN.
pub fn growth_bound(gnn: &Gnn) -> Result<f64> {
    source_kind(gnn)?;
    let (a, d) = lipschitz_and_dim(gnn);
    Ok((2.0 * d as f64 * a).powi(gnn.depth() as i32))
}

/// Rescaling of one source coordinate onto `[0,1]` and its gadget resolution.
#[derive(Debug, Clone, Copy)]
struct Gadget {
    coord: usize,
    lo: f64,
    width: f64,
    q: usize,
}

impl Gadget {
    /// `(x - lo) / width` as `(weight, bias)` on `x`.
    fn rescale(&self) -> (f64, f64) {
        (1.0 / self.width, -self.lo / self.width)
    }

    fn hidden_units(&self, kind: &Aggregation) -> usize {
        match kind {
            Aggregation::Mean => 4 * (self.q + 1),
            _ => 2 * self.q,
        }
    }
}

/// Compiles a Mean-GNN or Max-GNN into a `2m`-layer Sum-GNN whose outputs
/// stay within `eps` of the source on every graph featured in `[0,1]^p`.
///
/// Layer `2j-1` passes the current features through and prepares gadget
/// inputs (rescaled coordinates for mean, unary buckets for max) together with
/// a constant 1 whose neighbor sum is the degree. Layer `2j` recovers the
/// neighbor mean or max from the summed gadget inputs and feeds it, with the
/// vertex's own feature, into a copy of the source FNN.
pub fn compile_to_sum(source: &Gnn, eps: f64, opts: CompileOptions) -> Result<(Gnn, EmulationReport)> {
    let kind = source_kind(source)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("tolerance must be positive, got {eps}")));
    }
    let (a, d) = lipschitz_and_dim(source);
    let m = source.depth();
    let e_hat = eps_hat(eps, a, d, m);
    if !(e_hat > 0.0) || !e_hat.is_finite() {
        return Err(Error::Infeasible(format!(
            "per-gadget tolerance underflows: eps={eps}, a={a}, d={d}, m={m}, eps_hat={e_hat}"
        )));
    }

    // Boxes of the exact source features, starting from [0,1]^p.
    let p0 = source.input_dim();
    let mut lo = vec![0.0; p0];
    let mut hi = vec![1.0; p0];
    // Bound on |compiled - source| of the features entering the current layer.
    let mut drift = 0.0;
    let mut layers = Vec::with_capacity(2 * m);
    let mut gadget_units = 0usize;
    for layer in source.layers() {
        let p = layer.input_dim();
        let f = layer.fnn();
        let slack = 1e-9 * (1.0 + drift);
        let gadgets: Vec<Gadget> = (0..p)
            .filter(|&i| f.layers()[0].weights().chunks(2 * p).any(|row| row[p + i] != 0.0))
            .map(|i| {
                let glo = lo[i] - drift - slack;
                let width = hi[i] + drift + slack - glo;
                let mut q = (width / e_hat).ceil().max(1.0);
                while width / q >= e_hat {
                    q += 1.0;
                }
                if !(q <= opts.max_gadget_units as f64) {
                    return Err(Error::Infeasible(format!(
                        "coordinate {i} needs {q} gadget copies (eps_hat={e_hat}, width={width})"
                    )));
                }
                Ok(Gadget {
                    coord: i,
                    lo: glo,
                    width,
                    q: q as usize,
                })
            })
            .collect::<Result<_>>()?;
        gadget_units += gadgets.iter().map(|g| g.hidden_units(&kind)).sum::<usize>();
        if gadget_units > opts.max_gadget_units {
            return Err(Error::Infeasible(format!(
                "compiled network needs {gadget_units} gadget units, cap is {}",
                opts.max_gadget_units
            )));
        }
        let (prep, prep_width) = prep_layer(p, &gadgets, &kind)?;
        layers.push(prep);
        layers.push(combine_layer(p, prep_width, &gadgets, &kind, f)?);

        // propagate boxes: own feature in the box, aggregate in its hull with 0
        let mut in_lo = lo.clone();
        let mut in_hi = hi.clone();
        in_lo.extend(lo.iter().map(|&x| x.min(0.0)));
        in_hi.extend(hi.iter().map(|&x| x.max(0.0)));
        let (nlo, nhi) = f.interval_bounds(&in_lo, &in_hi)?;
        lo = nlo;
        hi = nhi;
        drift = f.lipschitz_upper() * (drift + e_hat);
    }
    let compiled = Gnn::new(layers, None)?;
    let report = EmulationReport {
        eps,
        eps_hat: e_hat,
        a,
        d,
        m,
        size_built: compiled.size(),
        gadget_units,
    };
    Ok((compiled, report))
}

/// Odd layer: `x -> (x, 1, gadget inputs)`. Returns the layer and its output width.
fn prep_layer(p: usize, gadgets: &[Gadget], kind: &Aggregation) -> Result<(GnnLayer, usize)> {
    let in_w = 2 * p;
    match kind {
        Aggregation::Mean => {
            let mut rows = Vec::with_capacity(p + 1 + gadgets.len());
            let mut bias = Vec::with_capacity(rows.capacity());
            for i in 0..p {
                let mut r = vec![0.0; in_w];
                r[i] = 1.0;
                rows.push(r);
                bias.push(0.0);
            }
            rows.push(vec![0.0; in_w]);
            bias.push(1.0);
            for g in gadgets {
                let (w, b) = g.rescale();
                let mut r = vec![0.0; in_w];
                r[g.coord] = w;
                rows.push(r);
                bias.push(b);
            }
            let width = rows.len();
            Ok((GnnLayer::new(Fnn::linear(rows, bias)?, vec![Aggregation::Sum])?, width))
        }
        _ => {
            // hidden: ReLU(x), ReLU(-x) per coordinate, then two ramps per bucket
            let (mut rows, mut bias) = (Vec::new(), Vec::new());
            for i in 0..p {
                for sign in [1.0, -1.0] {
                    let mut r = vec![0.0; in_w];
                    r[i] = sign;
                    rows.push(r);
                    bias.push(0.0);
                }
            }
            for g in gadgets {
                let (w, b) = g.rescale();
                let step = 1.0 / g.q as f64;
                for l in 1..=g.q {
                    for shift in [l - 1, l] {
                        let mut r = vec![0.0; in_w];
                        r[g.coord] = w;
                        rows.push(r);
                        bias.push(b - shift as f64 * step);
                    }
                }
            }
            let hidden_w = rows.len();
            let buckets: usize = gadgets.iter().map(|g| g.q).sum();
            let width = p + 1 + buckets;
            let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;
            let mut out = vec![vec![0.0; hidden_w]; width];
            let mut out_b = vec![0.0; width];
            for i in 0..p {
                out[i][2 * i] = 1.0;
                out[i][2 * i + 1] = -1.0;
            }
            out_b[p] = 1.0;
            for b in 0..buckets {
                out[p + 1 + b][2 * p + 2 * b] = 1.0;
                out[p + 1 + b][2 * p + 2 * b + 1] = -1.0;
            }
            let out = DenseLayer::from_rows(out, out_b, Activation::Identity)?;
            Ok((GnnLayer::new(Fnn::new(vec![hidden, out])?, vec![Aggregation::Sum])?, width))
        }
    }
}

/// Even layer: recovers `(own, aggregate)` from the prep layout and applies `f`.
fn combine_layer(
    p: usize,
    prep_width: usize,
    gadgets: &[Gadget],
    kind: &Aggregation,
    f: &Fnn,
) -> Result<GnnLayer> {
    let in_w = 2 * prep_width;
    let n_col = prep_width + p;
    let (mut rows, mut bias) = (Vec::new(), Vec::new());
    let unit = |r: Vec<f64>, b: f64, rows: &mut Vec<Vec<f64>>, bias: &mut Vec<f64>| {
        rows.push(r);
        bias.push(b);
        rows.len() - 1
    };
    // own passthrough
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; in_w];
            r[i] = sign;
            unit(r, 0.0, &mut rows, &mut bias);
        }
    }
    // [n >= 1] = ReLU(n) - ReLU(n - 1) on integer n
    let mut count_units = None;
    if !gadgets.is_empty() {
        let mut r = vec![0.0; in_w];
        r[n_col] = 1.0;
        let u0 = unit(r.clone(), 0.0, &mut rows, &mut bias);
        let u1 = unit(r, -1.0, &mut rows, &mut bias);
        count_units = Some((u0, u1));
    }
    // per gadget: list of (hidden unit, output weight) producing the [0,1] estimate
    let mut estimates: Vec<Vec<(usize, f64)>> = Vec::with_capacity(gadgets.len());
    let mut col = prep_width + p + 1;
    for g in gadgets {
        let inv_a = g.q as f64;
        let a = 1.0 / inv_a;
        let mut terms = Vec::new();
        match kind {
            Aggregation::Mean => {
                for l in 1..=g.q + 1 {
                    let start = rows.len();
                    trapezoid_units(in_w, n_col, col, l as f64, inv_a, &mut rows, &mut bias);
                    let s = l as f64 * a;
                    for (k, sign) in TRAPEZOID_SIGNS.iter().enumerate() {
                        terms.push((start + k, sign * s));
                    }
                }
                col += 1;
            }
            _ => {
                for _ in 0..g.q {
                    let mut r = vec![0.0; in_w];
                    r[col] = 1.0;
                    let u0 = unit(r.clone(), 0.0, &mut rows, &mut bias);
                    let u1 = unit(r, -a, &mut rows, &mut bias);
                    terms.push((u0, 1.0));
                    terms.push((u1, -1.0));
                    col += 1;
                }
            }
        }
        estimates.push(terms);
    }
    let hidden_w = rows.len();
    let hidden = DenseLayer::from_rows(rows, bias, Activation::Relu)?;

    // linear map hidden -> (own, aggregate) of width 2p
    let mut out = vec![vec![0.0; hidden_w]; 2 * p];
    for i in 0..p {
        out[i][2 * i] = 1.0;
        out[i][2 * i + 1] = -1.0;
    }
    for (g, terms) in gadgets.iter().zip(&estimates) {
        let row = &mut out[p + g.coord];
        let (u0, u1) = count_units.expect("count units exist when gadgets do");
        row[u0] += g.lo;
        row[u1] -= g.lo;
        for &(u, w) in terms {
            row[u] += g.width * w;
        }
    }
    let out = DenseLayer::from_rows(out, vec![0.0; 2 * p], Activation::Identity)?;
    let pre = Fnn::new(vec![hidden, out])?;
    GnnLayer::new(pre.then(f)?, vec![Aggregation::Sum])
}

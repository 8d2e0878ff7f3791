//! Batched forward and backward passes over compute plans, used for training.
//!
//! Aggregations here weight each distinct neighbor row by its multiplicity
//! instead of expanding the multiset, which is what makes large stars cheap.
//! Gradients flow through sum and mean exactly; max sends the gradient of each
//! coordinate to its argmax row (ties go to the lowest row).

use ndarray::Array2;

use super::{Aggregation, ComputePlan, Gnn, PlanRow};
use crate::error::{Error, Result};
use crate::neural::batch::{backward_batch, forward_batch, BatchCache};

/// Several plans stacked level by level, with row indices made global.
#[derive(Debug, Clone)]
pub struct TapeBatch {
    feature_dim: usize,
    inputs: Array2<f64>,
    levels: Vec<Vec<PlanRow>>,
    targets: Vec<usize>,
}

impl TapeBatch {
    pub fn new(plans: &[&ComputePlan]) -> Result<Self> {
        let first = plans
            .first()
            .ok_or_else(|| Error::invalid("tape batch needs at least one plan"))?;
        let depth = first.depth();
        let feature_dim = first.feature_dim();
        if plans
            .iter()
            .any(|p| p.depth() != depth || p.feature_dim() != feature_dim)
        {
            return Err(Error::invalid("plans in a batch must share depth and feature dimension"));
        }
        let mut flat = Vec::new();
        let mut prev_offsets = Vec::with_capacity(plans.len());
        for p in plans {
            prev_offsets.push(flat.len() / feature_dim);
            for row in p.inputs() {
                flat.extend_from_slice(row);
            }
        }
        let n0 = flat.len() / feature_dim;
        let inputs = Array2::from_shape_vec((n0, feature_dim), flat).expect("stacked inputs");
        let mut levels = Vec::with_capacity(depth);
        for layer in 1..=depth {
            let mut rows = Vec::new();
            let mut offsets = Vec::with_capacity(plans.len());
            for (p, &prev) in plans.iter().zip(&prev_offsets) {
                offsets.push(rows.len());
                rows.extend(p.level(layer).iter().map(|r| PlanRow {
                    own: r.own + prev,
                    neighbors: r.neighbors.iter().map(|&(i, c)| (i + prev, c)).collect(),
                }));
            }
            levels.push(rows);
            prev_offsets = offsets;
        }
        let targets = plans
            .iter()
            .zip(&prev_offsets)
            .map(|(p, &off)| p.target_row() + off)
            .collect();
        Ok(Self {
            feature_dim,
            inputs,
            levels,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

const NO_ROW: usize = usize::MAX;

#[derive(Debug, Clone)]
struct LayerCache {
    fnn: BatchCache,
    /// Per (row, slot, coordinate): argmax row for max slots.
    argmax: Vec<usize>,
    /// Per (row, slot, coordinate): derivative of a UPA slot.
    upa_slope: Vec<f64>,
}

/// Intermediate values retained for [`tape_backward`].
#[derive(Debug, Clone)]
pub struct TapeCache {
    layers: Vec<LayerCache>,
}

impl TapeCache {
    /// Every ReLU sign and max selection of the forward pass. Two parameter
    /// settings with equal signatures lie in the same linear region.
    pub fn signature(&self, gnn: &Gnn) -> Vec<usize> {
        let mut out = Vec::new();
        let mut bits = Vec::new();
        for (layer, c) in gnn.layers().iter().zip(&self.layers) {
            bits.clear();
            c.fnn.relu_pattern(layer.fnn(), &mut bits);
            out.extend(bits.iter().map(|&b| usize::from(b)));
            out.extend(c.argmax.iter().copied().filter(|&r| r != NO_ROW));
        }
        out
    }
}

fn check_batch(gnn: &Gnn, batch: &TapeBatch) -> Result<()> {
    if gnn.depth() != batch.depth() {
        return Err(Error::DimensionMismatch {
            context: "tape depth",
            expected: batch.depth(),
            got: gnn.depth(),
        });
    }
    if gnn.input_dim() != batch.feature_dim {
        return Err(Error::DimensionMismatch {
            context: "tape input features",
            expected: batch.feature_dim,
            got: gnn.input_dim(),
        });
    }
    Ok(())
}

/// Forward pass; returns one output row per plan (its target vertex).
pub fn tape_forward(gnn: &Gnn, batch: &TapeBatch) -> Result<(Array2<f64>, TapeCache)> {
    check_batch(gnn, batch)?;
    let mut h = batch.inputs.clone();
    let mut caches = Vec::with_capacity(gnn.depth());
    for (layer, rows) in gnn.layers().iter().zip(&batch.levels) {
        let p = layer.input_dim();
        let slots = layer.aggs().len();
        let width = p * (1 + slots);
        let mut x = vec![0.0; rows.len() * width];
        let mut argmax = vec![NO_ROW; rows.len() * slots * p];
        let mut upa_slope = vec![0.0; rows.len() * slots * p];
        for (r, row) in rows.iter().enumerate() {
            let xr = &mut x[r * width..(r + 1) * width];
            xr[..p].copy_from_slice(h.row(row.own).as_slice().expect("contiguous"));
            if row.neighbors.is_empty() {
                continue;
            }
            let degree = row.degree() as f64;
            for (s, agg) in layer.aggs().iter().enumerate() {
                let slot = &mut xr[p * (1 + s)..p * (2 + s)];
                let meta = (r * slots + s) * p;
                match agg {
                    Aggregation::Sum | Aggregation::Mean => {
                        for &(i, c) in &row.neighbors {
                            for (o, &v) in slot.iter_mut().zip(h.row(i)) {
                                *o += c as f64 * v;
                            }
                        }
                        if matches!(agg, Aggregation::Mean) {
                            for o in slot.iter_mut() {
                                *o /= degree;
                            }
                        }
                    }
                    Aggregation::Max => {
                        for j in 0..p {
                            let mut best = NO_ROW;
                            let mut val = f64::NEG_INFINITY;
                            for &(i, _) in &row.neighbors {
                                let v = h[[i, j]];
                                if best == NO_ROW || v > val {
                                    best = i;
                                    val = v;
                                }
                            }
                            slot[j] = val;
                            argmax[meta + j] = best;
                        }
                    }
                    Aggregation::Upa { coeffs, mode } => {
                        for j in 0..p {
                            let x0 = h[[row.neighbors[0].0, j]];
                            if row.neighbors.iter().any(|&(i, _)| h[[i, j]] != x0) {
                                return Err(Error::NonHomogeneous);
                            }
                            let (v, slope) =
                                Aggregation::upa_value_and_slope(coeffs, *mode, x0, row.degree());
                            slot[j] = v;
                            upa_slope[meta + j] = slope;
                        }
                    }
                }
            }
        }
        let x = Array2::from_shape_vec((rows.len(), width), x).expect("layer input shape");
        let (out, cache) = forward_batch(layer.fnn(), x);
        h = out;
        caches.push(LayerCache {
            fnn: cache,
            argmax,
            upa_slope,
        });
    }
    let q = gnn.output_dim();
    let mut y = Array2::zeros((batch.targets.len(), q));
    for (b, &t) in batch.targets.iter().enumerate() {
        y.row_mut(b).assign(&h.row(t));
    }
    Ok((y, TapeCache { layers: caches }))
}

/// Backward pass for the upstream gradient `d_out` (one row per plan).
/// Returns the gradient in [`Gnn::params`] order.
pub fn tape_backward(
    gnn: &Gnn,
    batch: &TapeBatch,
    cache: &TapeCache,
    d_out: &Array2<f64>,
) -> Result<Vec<f64>> {
    check_batch(gnn, batch)?;
    if d_out.dim() != (batch.targets.len(), gnn.output_dim()) {
        return Err(Error::DimensionMismatch {
            context: "tape upstream gradient rows",
            expected: batch.targets.len(),
            got: d_out.nrows(),
        });
    }
    let mut grads = vec![0.0; gnn.num_params()];
    let mut offsets = Vec::with_capacity(gnn.depth());
    let mut off = 0;
    for l in gnn.layers() {
        offsets.push(off);
        off += l.fnn().num_params();
    }
    let last_rows = batch.levels.last().expect("nonempty").len();
    let mut dh = Array2::zeros((last_rows, gnn.output_dim()));
    for (b, &t) in batch.targets.iter().enumerate() {
        let mut row = dh.row_mut(t);
        row += &d_out.row(b);
    }
    for li in (0..gnn.depth()).rev() {
        let layer = &gnn.layers()[li];
        let lc = &cache.layers[li];
        let n = layer.fnn().num_params();
        let dx = backward_batch(
            layer.fnn(),
            &lc.fnn,
            dh,
            &mut grads[offsets[li]..offsets[li] + n],
        );
        if li == 0 {
            break;
        }
        let rows = &batch.levels[li];
        let prev_rows = batch.levels[li - 1].len();
        let p = layer.input_dim();
        let slots = layer.aggs().len();
        let mut dprev = Array2::zeros((prev_rows, p));
        for (r, row) in rows.iter().enumerate() {
            let g = dx.row(r);
            {
                let mut own = dprev.row_mut(row.own);
                for j in 0..p {
                    own[j] += g[j];
                }
            }
            if row.neighbors.is_empty() {
                continue;
            }
            let degree = row.degree() as f64;
            for (s, agg) in layer.aggs().iter().enumerate() {
                let gs = &g.as_slice().expect("contiguous")[p * (1 + s)..p * (2 + s)];
                let meta = (r * slots + s) * p;
                match agg {
                    Aggregation::Sum | Aggregation::Mean => {
                        let scale = if matches!(agg, Aggregation::Mean) { 1.0 / degree } else { 1.0 };
                        for &(i, c) in &row.neighbors {
                            let w = c as f64 * scale;
                            let mut d = dprev.row_mut(i);
                            for j in 0..p {
                                d[j] += w * gs[j];
                            }
                        }
                    }
                    Aggregation::Max => {
                        for j in 0..p {
                            dprev[[lc.argmax[meta + j], j]] += gs[j];
                        }
                    }
                    Aggregation::Upa { .. } => {
                        // symmetric extension: p(mean) or p(sum) of the rows
                        for &(i, c) in &row.neighbors {
                            let share = c as f64 / degree;
                            for j in 0..p {
                                dprev[[i, j]] += share * lc.upa_slope[meta + j] * gs[j];
                            }
                        }
                    }
                }
            }
        }
        dh = dprev;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_family, FamilySpec};
    use crate::util::seeded_rng;

    #[test]
    fn tape_forward_matches_exact_forward() {
        let mut rng = seeded_rng(5);
        let graphs: Vec<_> = (1..6)
            .map(|k| make_family(FamilySpec::tripartite_sv(k, 7 - k)).unwrap())
            .collect();
        let plans: Vec<_> = graphs
            .iter()
            .map(|g| ComputePlan::build(g, 0, 2).unwrap())
            .collect();
        let refs: Vec<&ComputePlan> = plans.iter().collect();
        let batch = TapeBatch::new(&refs).unwrap();
        for agg in [Aggregation::Sum, Aggregation::Mean, Aggregation::Max] {
            let gnn = Gnn::random(
                1,
                &[4, 1],
                &[vec![5], vec![5]],
                &[vec![agg.clone()], vec![agg.clone(), Aggregation::Sum]],
                1.0,
                1.0,
                &mut rng,
            )
            .unwrap();
            let (y, _) = tape_forward(&gnn, &batch).unwrap();
            for (b, g) in graphs.iter().enumerate() {
                let exact = gnn.output_at(g, 0).unwrap()[0];
                assert!((y[[b, 0]] - exact).abs() <= 1e-12 * exact.abs().max(1.0));
            }
        }
    }
}

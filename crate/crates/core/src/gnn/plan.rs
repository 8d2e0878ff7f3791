//! Compressed receptive-field computation for a single vertex.
//!
//! Level 0 holds the distinct input features of the receptive field; level `i`
//! holds the distinct `(own row, neighbor multiset)` combinations feeding layer
//! `i`. Vertices that share a key share a value at that level, so a star with a
//! million identical leaves compresses to a handful of rows.

use std::collections::HashMap;

use super::Gnn;
use crate::error::{Error, Result};
use crate::graph::FeaturedGraph;

/// One row of a plan level: an index into the previous level for the vertex's
/// own value and the multiset of neighbor rows as `(row, multiplicity)` pairs
/// sorted by row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanRow {
    pub own: usize,
    pub neighbors: Vec<(usize, usize)>,
}

impl PlanRow {
    pub fn degree(&self) -> usize {
        self.neighbors.iter().map(|&(_, c)| c).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ComputePlan {
    feature_dim: usize,
    inputs: Vec<Vec<f64>>,
    levels: Vec<Vec<PlanRow>>,
    target_row: usize,
}

impl ComputePlan {
    /// Plan for the output of a `depth`-layer gnn at vertex `target`.
    pub fn build(graph: &FeaturedGraph, target: usize, depth: usize) -> Result<Self> {
        let n = graph.num_vertices();
        if target >= n {
            return Err(Error::invalid(format!("vertex {target} out of range for {n} vertices")));
        }
        if depth == 0 {
            return Err(Error::invalid("plan depth must be positive"));
        }
        // focus[i] = vertices whose level-i value is needed, in ascending order
        let mut focus: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
        focus[depth] = vec![target];
        let mut mark = vec![false; n];
        for i in (0..depth).rev() {
            let mut set = focus[i + 1].clone();
            for &v in &focus[i + 1] {
                mark[v] = true;
            }
            for &v in &focus[i + 1] {
                for &w in graph.neighbors(v) {
                    if !mark[w] {
                        mark[w] = true;
                        set.push(w);
                    }
                }
            }
            for &v in &set {
                mark[v] = false;
            }
            set.sort_unstable();
            focus[i] = set;
        }

        const NONE: usize = usize::MAX;
        let mut row_of = vec![NONE; n];
        let mut inputs = Vec::new();
        let mut input_ids: HashMap<Vec<u64>, usize> = HashMap::new();
        for &v in &focus[0] {
            let f = graph.feature(v);
            let key: Vec<u64> = f.iter().map(|x| x.to_bits()).collect();
            let next = inputs.len();
            let id = *input_ids.entry(key).or_insert(next);
            if id == next {
                inputs.push(f.to_vec());
            }
            row_of[v] = id;
        }

        let mut levels = Vec::with_capacity(depth);
        let mut scratch = Vec::new();
        for focus_i in &focus[1..] {
            let mut rows: Vec<PlanRow> = Vec::new();
            let mut ids: HashMap<PlanRow, usize> = HashMap::new();
            let mut assigned = Vec::with_capacity(focus_i.len());
            for &v in focus_i {
                scratch.clear();
                scratch.extend(graph.neighbors(v).iter().map(|&w| row_of[w]));
                scratch.sort_unstable();
                let mut neighbors: Vec<(usize, usize)> = Vec::new();
                for &r in &scratch {
                    debug_assert_ne!(r, NONE);
                    match neighbors.last_mut() {
                        Some((last, count)) if *last == r => *count += 1,
                        _ => neighbors.push((r, 1)),
                    }
                }
                let row = PlanRow {
                    own: row_of[v],
                    neighbors,
                };
                let next = rows.len();
                let id = *ids.entry(row.clone()).or_insert(next);
                if id == next {
                    rows.push(row);
                }
                assigned.push((v, id));
            }
            for &(v, id) in &assigned {
                row_of[v] = id;
            }
            levels.push(rows);
        }
        Ok(Self {
            feature_dim: graph.feature_dim(),
            inputs,
            levels,
            target_row: row_of[target],
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Rows feeding layer `layer` (1-based).
    pub fn level(&self, layer: usize) -> &[PlanRow] {
        &self.levels[layer - 1]
    }

    pub fn target_row(&self) -> usize {
        self.target_row
    }

    /// Evaluates the plan with the same canonical aggregation as the full
    /// forward pass, expanding every neighbor multiset.
    pub fn eval_exact(&self, gnn: &Gnn) -> Result<Vec<f64>> {
        if gnn.depth() != self.depth() {
            return Err(Error::DimensionMismatch {
                context: "plan depth",
                expected: self.depth(),
                got: gnn.depth(),
            });
        }
        if gnn.input_dim() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                context: "gnn input features",
                expected: gnn.input_dim(),
                got: self.feature_dim,
            });
        }
        let mut values: Vec<Vec<f64>> = self.inputs.clone();
        let mut col = Vec::new();
        for (layer, rows) in gnn.layers().iter().zip(&self.levels) {
            let mut next = Vec::with_capacity(rows.len());
            for row in rows {
                let mut nb: Vec<&[f64]> = Vec::with_capacity(row.degree());
                for &(r, count) in &row.neighbors {
                    nb.extend(std::iter::repeat_n(values[r].as_slice(), count));
                }
                let input = layer.combine_input(&values[row.own], &nb, &mut col)?;
                next.push(layer.fnn().eval(&input)?);
            }
            values = next;
        }
        Ok(values.swap_remove(self.target_row))
    }
}

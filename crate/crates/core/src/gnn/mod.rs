//! Aggregate-combine GNN semantics.
//!
//! A layer maps every vertex `v` to `f(x_v, agg_1(N(v)), ..., agg_b(N(v)))`.
//! Aggregations reduce each coordinate over the canonical (sorted) multiset, so
//! results depend only on the multiset and never on vertex numbering.

mod plan;
mod tape;

pub use plan::{ComputePlan, PlanRow};
pub use tape::{tape_backward, tape_forward, TapeBatch, TapeCache};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeaturedGraph;
use crate::neural::Fnn;
use crate::util::{canonical_sum, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpaMode {
    /// `p(x)` on `{x}^b`.
    OfX,
    /// `p(b x)` on `{x}^b`.
    OfBx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    Mean,
    Max,
    /// Uniform polynomial aggregation, defined only on homogeneous multisets.
    Upa { coeffs: Vec<f64>, mode: UpaMode },
}

impl Aggregation {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Upa { .. } => "upa",
        }
    }

    /// Reduces one coordinate column. `col` must be nonempty; it is reordered.
    pub(crate) fn reduce_column(&self, col: &mut [f64]) -> Result<f64> {
        debug_assert!(!col.is_empty());
        match self {
            Aggregation::Sum => Ok(canonical_sum(col)),
            Aggregation::Mean => {
                col.sort_unstable_by(f64::total_cmp);
                if col[0] == col[col.len() - 1] {
                    Ok(col[0])
                } else {
                    Ok(crate::util::pairwise_sum(col) / col.len() as f64)
                }
            }
            Aggregation::Max => Ok(col.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            Aggregation::Upa { coeffs, mode } => {
                let x = col[0];
                if col.iter().any(|&y| y != x) {
                    return Err(Error::NonHomogeneous);
                }
                let t = match mode {
                    UpaMode::OfX => x,
                    UpaMode::OfBx => col.len() as f64 * x,
                };
                Ok(horner(coeffs, t))
            }
        }
    }

    /// Value and derivative of a UPA polynomial at the homogeneous point `x`
    /// repeated `b` times.
    pub(crate) fn upa_value_and_slope(coeffs: &[f64], mode: UpaMode, x: f64, b: usize) -> (f64, f64) {
        let (t, scale) = match mode {
            UpaMode::OfX => (x, 1.0),
            UpaMode::OfBx => (b as f64 * x, b as f64),
        };
        let mut value = 0.0;
        let mut slope = 0.0;
        for &a in coeffs.iter().rev() {
            slope = slope * t + value;
            value = value * t + a;
        }
        (value, slope * scale)
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::invalid(format!("unknown aggregation '{s}'"))),
        }
    }
}

/// Aggregates a multiset of equal-length vectors. The empty multiset is only
/// allowed for `sum`, which yields the zero vector of length `dim`.
pub fn aggregate(agg: &Aggregation, values: &[&[f64]], dim: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return match agg {
            Aggregation::Sum => Ok(vec![0.0; dim]),
            other => Err(Error::EmptyMultiset(other.name())),
        };
    }
    if let Some(bad) = values.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "aggregation input",
            expected: dim,
            got: bad.len(),
        });
    }
    let mut col = Vec::with_capacity(values.len());
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        col.clear();
        col.extend(values.iter().map(|v| v[j]));
        out.push(agg.reduce_column(&mut col)?);
    }
    Ok(out)
}

/// Aggregation slot used inside a layer: the empty neighborhood maps to zero.
pub(crate) fn aggregate_slot(
    agg: &Aggregation,
    values: &[&[f64]],
    dim: usize,
    out: &mut Vec<f64>,
    col: &mut Vec<f64>,
) -> Result<()> {
    if values.is_empty() {
        out.extend(std::iter::repeat_n(0.0, dim));
        return Ok(());
    }
    for j in 0..dim {
        col.clear();
        col.extend(values.iter().map(|v| v[j]));
        out.push(agg.reduce_column(col)?);
    }
    Ok(())
}

/// Vertex feature map stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "feature data of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_graph(graph: &FeaturedGraph) -> Self {
        Self {
            dim: graph.feature_dim(),
            data: graph.features().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayer {
    fnn: Fnn,
    aggs: Vec<Aggregation>,
    in_dim: usize,
}

impl GnnLayer {
    pub fn new(fnn: Fnn, aggs: Vec<Aggregation>) -> Result<Self> {
        if aggs.is_empty() {
            return Err(Error::invalid("a gnn layer needs at least one aggregation"));
        }
        let slots = 1 + aggs.len();
        if !fnn.input_dim().is_multiple_of(slots) {
            return Err(Error::invalid(format!(
                "fnn input dimension {} is not divisible by {slots} (own feature plus {} aggregations)",
                fnn.input_dim(),
                aggs.len()
            )));
        }
        let in_dim = fnn.input_dim() / slots;
        Ok(Self { fnn, aggs, in_dim })
    }

    pub fn fnn(&self) -> &Fnn {
        &self.fnn
    }

    pub fn fnn_mut(&mut self) -> &mut Fnn {
        &mut self.fnn
    }

    pub fn aggs(&self) -> &[Aggregation] {
        &self.aggs
    }

    pub fn input_dim(&self) -> usize {
        self.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.fnn.output_dim()
    }

    /// Combine-function input for one vertex: own feature then every aggregation slot.
    pub(crate) fn combine_input(
        &self,
        own: &[f64],
        neighbors: &[&[f64]],
        col: &mut Vec<f64>,
    ) -> Result<Vec<f64>> {
        let mut input = Vec::with_capacity(self.fnn.input_dim());
        input.extend_from_slice(own);
        for agg in &self.aggs {
            aggregate_slot(agg, neighbors, self.in_dim, &mut input, col)?;
        }
        Ok(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutAgg {
    Sum,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub agg: ReadoutAgg,
    pub fnn: Fnn,
}

/// Multi-layer AC-GNN with an optional graph-level readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GnnRepr", into = "GnnRepr")]
pub struct Gnn {
    layers: Vec<GnnLayer>,
    readout: Option<Readout>,
}

/// Feature maps of every layer, index 0 being the input features.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub maps: Vec<FeatureMap>,
}

impl LayerTrace {
    pub fn output(&self) -> &FeatureMap {
        self.maps.last().expect("trace holds at least the input map")
    }
}

impl Gnn {
    pub fn new(layers: Vec<GnnLayer>, readout: Option<Readout>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a gnn needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    context: "gnn layer chaining",
                    expected: pair[0].output_dim(),
                    got: pair[1].input_dim(),
                });
            }
        }
        if let Some(r) = &readout {
            let last = layers.last().expect("nonempty").output_dim();
            if r.fnn.input_dim() != last {
                return Err(Error::DimensionMismatch {
                    context: "readout input",
                    expected: last,
                    got: r.fnn.input_dim(),
                });
            }
        }
        Ok(Self { layers, readout })
    }

    /// Gnn whose every layer uses the single aggregation `agg`.
    pub fn uniform(fnns: Vec<Fnn>, agg: Aggregation) -> Result<Self> {
        let layers = fnns
            .into_iter()
            .map(|f| GnnLayer::new(f, vec![agg.clone()]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, None)
    }

    /// Random gnn: layer `i` has aggregations `aggs[i]`, an FNN with hidden
    /// widths `hidden[i]` and output width `widths[i]`; weights uniform in
    /// `[-weight_scale, weight_scale]`, biases in `[-bias_scale, bias_scale]`.
    pub fn random(
        input_dim: usize,
        widths: &[usize],
        hidden: &[Vec<usize>],
        aggs: &[Vec<Aggregation>],
        weight_scale: f64,
        bias_scale: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if widths.len() != hidden.len() || widths.len() != aggs.len() {
            return Err(Error::invalid("random gnn: per-layer lists differ in length"));
        }
        let mut p = input_dim;
        let mut layers = Vec::with_capacity(widths.len());
        for ((&q, h), a) in widths.iter().zip(hidden).zip(aggs) {
            let mut dims = vec![p * (1 + a.len())];
            dims.extend_from_slice(h);
            dims.push(q);
            let fnn = Fnn::random_uniform(&dims, weight_scale, bias_scale, rng)?;
            layers.push(GnnLayer::new(fnn, a.clone())?);
            p = q;
        }
        Self::new(layers, None)
    }

    pub fn with_readout(mut self, readout: Readout) -> Result<Self> {
        let layers = std::mem::take(&mut self.layers);
        Self::new(layers, Some(readout))
    }

    pub fn layers(&self) -> &[GnnLayer] {
        &self.layers
    }

    pub fn readout(&self) -> Option<&Readout> {
        self.readout.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").output_dim()
    }

    /// Total FNN node count over all layers.
    pub fn size(&self) -> usize {
        self.layers.iter().map(|l| l.fnn.size()).sum()
    }

    /// The single aggregation shared by every slot of every layer, if any.
    pub fn uniform_aggregation(&self) -> Option<&Aggregation> {
        let first = &self.layers[0].aggs[0];
        self.layers
            .iter()
            .flat_map(|l| &l.aggs)
            .all(|a| a == first)
            .then_some(first)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.fnn.num_params()).sum()
    }

    /// Layer FNN parameters concatenated in layer order (readout excluded).
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.fnn.params()).collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                context: "gnn parameters",
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.fnn.num_params();
            l.fnn.set_params(&params[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// Runs every layer over the whole graph.
    pub fn forward(&self, graph: &FeaturedGraph) -> Result<LayerTrace> {
        gnn_forward(self, graph)
    }

    /// Output at vertex `v`, computed only on its receptive field. Bitwise
    /// identical to the corresponding row of [`gnn_forward`].
    pub fn output_at(&self, graph: &FeaturedGraph, v: usize) -> Result<Vec<f64>> {
        ComputePlan::build(graph, v, self.depth())?.eval_exact(self)
    }

    /// Output at the graph's designated target vertex.
    pub fn output_at_target(&self, graph: &FeaturedGraph) -> Result<Vec<f64>> {
        let t = graph
            .target()
            .ok_or_else(|| Error::invalid("graph has no target vertex"))?;
        self.output_at(graph, t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("gnn serialization cannot fail")
    }

    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })
    }
}

/// Applies one layer to every vertex. Vertices whose combine input coincides
/// bitwise share a single FNN evaluation.
pub fn layer_forward(
    layer: &GnnLayer,
    graph: &FeaturedGraph,
    feats: &FeatureMap,
) -> Result<FeatureMap> {
    if feats.dim() != layer.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "layer input features",
            expected: layer.input_dim(),
            got: feats.dim(),
        });
    }
    if feats.len() != graph.num_vertices() {
        return Err(Error::DimensionMismatch {
            context: "feature map rows",
            expected: graph.num_vertices(),
            got: feats.len(),
        });
    }
    let q = layer.output_dim();
    let mut data = Vec::with_capacity(graph.num_vertices() * q);
    let mut memo: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    let mut col = Vec::new();
    let mut nb: Vec<&[f64]> = Vec::new();
    for v in 0..graph.num_vertices() {
        nb.clear();
        nb.extend(graph.neighbors(v).iter().map(|&w| feats.row(w)));
        let input = layer.combine_input(feats.row(v), &nb, &mut col)?;
        let key: Vec<u64> = input.iter().map(|x| x.to_bits()).collect();
        if let Some(out) = memo.get(&key) {
            data.extend_from_slice(out);
        } else {
            let out = layer.fnn.eval(&input)?;
            data.extend_from_slice(&out);
            memo.insert(key, out);
        }
    }
    FeatureMap::new(q, data)
}

pub fn gnn_forward(gnn: &Gnn, graph: &FeaturedGraph) -> Result<LayerTrace> {
    let mut maps = vec![FeatureMap::from_graph(graph)];
    for layer in &gnn.layers {
        let next = layer_forward(layer, graph, maps.last().expect("nonempty"))?;
        maps.push(next);
    }
    Ok(LayerTrace { maps })
}

/// Graph-level output: sum or average of the final map, then the readout FNN.
pub fn readout_eval(gnn: &Gnn, graph: &FeaturedGraph) -> Result<Vec<f64>> {
    let readout = gnn.readout.as_ref().ok_or(Error::MissingReadout)?;
    let trace = gnn_forward(gnn, graph)?;
    let map = trace.output();
    let mut pooled = Vec::with_capacity(map.dim());
    let mut col = Vec::with_capacity(map.len());
    for j in 0..map.dim() {
        col.clear();
        col.extend((0..map.len()).map(|v| map.row(v)[j]));
        let s = if col.is_empty() { 0.0 } else { canonical_sum(&mut col) };
        pooled.push(match readout.agg {
            ReadoutAgg::Sum => s,
            ReadoutAgg::Avg if map.is_empty() => 0.0,
            ReadoutAgg::Avg => s / map.len() as f64,
        });
    }
    readout.fnn.eval(&pooled)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    fnn: Fnn,
    aggs: Vec<Aggregation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GnnRepr {
    layers: Vec<LayerRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    readout: Option<Readout>,
}

impl TryFrom<GnnRepr> for Gnn {
    type Error = Error;

    fn try_from(repr: GnnRepr) -> Result<Self> {
        let layers = repr
            .layers
            .into_iter()
            .map(|l| GnnLayer::new(l.fnn, l.aggs))
            .collect::<Result<Vec<_>>>()?;
        Gnn::new(layers, repr.readout)
    }
}

impl From<Gnn> for GnnRepr {
    fn from(g: Gnn) -> Self {
        GnnRepr {
            layers: g
                .layers
                .into_iter()
                .map(|l| LayerRepr {
                    fnn: l.fnn,
                    aggs: l.aggs,
                })
                .collect(),
            readout: g.readout,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_family, FamilySpec};

    fn project_agg() -> Fnn {
        Fnn::linear(vec![vec![0.0, 1.0]], vec![0.0]).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let ones: Vec<&[f64]> = vec![&[1.0], &[1.0], &[1.0]];
        assert_eq!(aggregate(&Aggregation::Sum, &ones, 1).unwrap(), vec![3.0]);
        let mix: Vec<&[f64]> = vec![&[0.0], &[1.0]];
        assert_eq!(aggregate(&Aggregation::Mean, &mix, 1).unwrap(), vec![0.5]);
        let upa = Aggregation::Upa {
            coeffs: vec![0.0, 1.0],
            mode: UpaMode::OfBx,
        };
        let twos: Vec<&[f64]> = vec![&[2.0]; 3];
        assert_eq!(aggregate(&upa, &twos, 1).unwrap(), vec![6.0]);
        assert!(matches!(aggregate(&upa, &mix, 1), Err(Error::NonHomogeneous)));
        assert!(matches!(aggregate(&Aggregation::Max, &[], 1), Err(Error::EmptyMultiset("max"))));
        assert_eq!(aggregate(&Aggregation::Sum, &[], 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn upa_slope_matches_polynomial_derivative() {
        let (v, s) = Aggregation::upa_value_and_slope(&[1.0, -2.0, 3.0], UpaMode::OfBx, 0.5, 4);
        // p(t) = 1 - 2t + 3t^2 at t = 2
        assert_eq!(v, 9.0);
        assert_eq!(s, 4.0 * 10.0);
    }

    #[test]
    fn star_three_with_each_aggregation() {
        let g = make_family(FamilySpec::star_sv(3)).unwrap();
        for (agg, center) in [(Aggregation::Sum, 3.0), (Aggregation::Mean, 1.0), (Aggregation::Max, 1.0)] {
            let gnn = Gnn::uniform(vec![project_agg()], agg).unwrap();
            let trace = gnn.forward(&g).unwrap();
            assert_eq!(trace.maps.len(), 2);
            assert_eq!(trace.maps[0], FeatureMap::from_graph(&g));
            assert_eq!(trace.output().row(0), &[center]);
            for v in 1..4 {
                assert_eq!(trace.output().row(v), &[1.0]);
            }
        }
    }

    #[test]
    fn isolated_vertex_gets_zero_aggregate() {
        let g = FeaturedGraph::from_rows(vec![], vec![vec![4.0]], Some(0)).unwrap();
        for agg in [Aggregation::Sum, Aggregation::Mean, Aggregation::Max] {
            let gnn = Gnn::uniform(vec![Fnn::identity(2).unwrap()], agg).unwrap();
            assert_eq!(gnn.forward(&g).unwrap().output().row(0), &[4.0, 0.0]);
        }
    }

    #[test]
    fn readout_examples() {
        let g = FeaturedGraph::from_rows(vec![(0, 1)], vec![vec![1.0], vec![3.0]], None).unwrap();
        let keep_own = Fnn::linear(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        let gnn = Gnn::uniform(vec![keep_own.clone()], Aggregation::Sum)
            .unwrap()
            .with_readout(Readout {
                agg: ReadoutAgg::Avg,
                fnn: Fnn::identity(1).unwrap(),
            })
            .unwrap();
        assert_eq!(readout_eval(&gnn, &g).unwrap(), vec![2.0]);

        let b = make_family(FamilySpec::bipartite_uc(2, 3)).unwrap();
        let gnn = Gnn::uniform(vec![keep_own], Aggregation::Sum)
            .unwrap()
            .with_readout(Readout {
                agg: ReadoutAgg::Sum,
                fnn: Fnn::identity(1).unwrap(),
            })
            .unwrap();
        assert_eq!(readout_eval(&gnn, &b).unwrap(), vec![6.0]);

        let plain = Gnn::uniform(vec![Fnn::identity(2).unwrap()], Aggregation::Sum).unwrap();
        assert!(matches!(readout_eval(&plain, &g), Err(Error::MissingReadout)));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = crate::util::seeded_rng(3);
        let gnn = Gnn::random(
            2,
            &[3, 1],
            &[vec![4], vec![]],
            &[
                vec![Aggregation::Mean],
                vec![
                    Aggregation::Max,
                    Aggregation::Upa {
                        coeffs: vec![0.5, -1.0],
                        mode: UpaMode::OfX,
                    },
                ],
            ],
            1.0,
            0.5,
            &mut rng,
        )
        .unwrap();
        let text = gnn.to_json();
        assert!(text.contains("\"mean\"") && text.contains("\"upa\"") && text.contains("of_x"));
        assert_eq!(Gnn::from_json(&text, "mem").unwrap(), gnn);
        assert!(Gnn::from_json(r#"{"layers":[]}"#, "mem").is_err());
    }

    #[test]
    fn focused_output_matches_full_forward() {
        let mut rng = crate::util::seeded_rng(11);
        let g = make_family(FamilySpec::tripartite_sv(3, 4)).unwrap();
        for agg in [Aggregation::Sum, Aggregation::Mean, Aggregation::Max] {
            let gnn = Gnn::random(1, &[3, 2], &[vec![4], vec![3]], &[vec![agg.clone()], vec![agg.clone()]], 1.0, 1.0, &mut rng)
                .unwrap();
            let full = gnn.forward(&g).unwrap();
            for v in 0..g.num_vertices() {
                assert_eq!(gnn.output_at(&g, v).unwrap(), full.output().row(v));
            }
        }
    }
}

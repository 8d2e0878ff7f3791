use serde::{Deserialize, Serialize};

use super::emulation::{compile_to_sum, growth_bound, CompileOptions, EmulationReport};
use super::gadgets::{build_max_approx, build_mean_approx};
use crate::error::{Error, Result};
use crate::gnn::{aggregate, Aggregation, Gnn};
use crate::graph::{make_family, random_graph, FamilySpec, FeaturedGraph};
use crate::util::Rng;

use rand::Rng as _;

/// Rounding allowance on both sides of a sandwich check.
pub const SANDWICH_TOL: f64 = 1e-12;

/// Outcome of checking `reference <= output <= reference + eps` at every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub aggregation: String,
    pub eps: f64,
    pub d: usize,
    pub graphs: usize,
    pub vertices: usize,
    pub violations: usize,
    /// Smallest `output - reference` seen (negative means a lower violation).
    pub min_excess: f64,
    /// Largest `output - reference` seen.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub bound: f64,
    /// `(k, max |output|)` at the center of the star with `k` leaves.
    pub outputs: Vec<(u64, f64)>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulationCheck {
    pub report: EmulationReport,
    pub graphs: usize,
    pub vertices: usize,
    pub max_gap: f64,
    pub holds: bool,
}

fn random_sized(max_vertices: usize, d: usize, rng: &mut Rng) -> Result<FeaturedGraph> {
    let n = rng.gen_range(1..=max_vertices.max(1));
    let p = rng.gen_range(0.05..0.6);
    random_graph(n, d, p, rng)
}

fn neighbor_reference(agg: &Aggregation, graph: &FeaturedGraph, v: usize) -> Result<Vec<f64>> {
    let nb: Vec<&[f64]> = graph.neighbors(v).iter().map(|&w| graph.feature(w)).collect();
    if nb.is_empty() {
        return Ok(vec![0.0; graph.feature_dim()]);
    }
    aggregate(agg, &nb, graph.feature_dim())
}

/// Builds the mean or max gadget at tolerance `eps` and checks the sandwich
/// on `graphs` random graphs with at most `max_vertices` vertices.
pub fn verify_sandwich(
    agg: &Aggregation,
    eps: f64,
    d: usize,
    graphs: usize,
    max_vertices: usize,
    rng: &mut Rng,
) -> Result<SandwichReport> {
    let gnn = match agg {
        Aggregation::Mean => build_mean_approx(eps, d)?,
        Aggregation::Max => build_max_approx(eps, d)?,
        other => return Err(Error::Unsupported(format!("no sum gadget for {other}"))),
    };
    let mut r = SandwichReport {
        aggregation: agg.name().to_string(),
        eps,
        d,
        graphs,
        vertices: 0,
        violations: 0,
        min_excess: f64::INFINITY,
        max_excess: f64::NEG_INFINITY,
    };
    for _ in 0..graphs {
        let g = random_sized(max_vertices, d, rng)?;
        let trace = gnn.forward(&g)?;
        for v in 0..g.num_vertices() {
            let want = neighbor_reference(agg, &g, v)?;
            let mut bad = false;
            for (y, x) in trace.output().row(v).iter().zip(&want) {
                let e = y - x;
                r.min_excess = r.min_excess.min(e);
                r.max_excess = r.max_excess.max(e);
                bad |= !(e >= -SANDWICH_TOL && e <= eps + SANDWICH_TOL);
            }
            r.vertices += 1;
            r.violations += bad as usize;
        }
    }
    Ok(r)
}

/// Center outputs on stars whose `k` leaves and center carry the all-ones
/// feature, against the growth bound of a Mean-GNN or Max-GNN.
pub fn verify_growth(gnn: &Gnn, ks: &[u64]) -> Result<GrowthReport> {
    let bound = growth_bound(gnn)?;
    let p = gnn.input_dim();
    let mut outputs = Vec::with_capacity(ks.len());
    for &k in ks {
        let star = make_family(FamilySpec::star_sv(k))?;
        let star = star.with_features(p, vec![1.0; star.num_vertices() * p])?;
        let y = gnn.output_at_target(&star)?;
        outputs.push((k, y.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }
    let holds = outputs.iter().all(|&(_, y)| y <= bound);
    Ok(GrowthReport { bound, outputs, holds })
}

/// Compiles `source` at tolerance `eps` and measures the largest
/// coordinate gap over every vertex of `graphs` random graphs.
pub fn verify_emulation(
    source: &Gnn,
    eps: f64,
    graphs: usize,
    max_vertices: usize,
    rng: &mut Rng,
) -> Result<EmulationCheck> {
    let (sum, report) = compile_to_sum(source, eps, CompileOptions::default())?;
    let d = source.input_dim();
    let mut max_gap = 0.0f64;
    let mut vertices = 0;
    for _ in 0..graphs {
        let g = random_sized(max_vertices, d, rng)?;
        let a = source.forward(&g)?;
        let b = sum.forward(&g)?;
        for (x, y) in a.output().data().iter().zip(b.output().data()) {
            max_gap = max_gap.max((x - y).abs());
        }
        vertices += g.num_vertices();
    }
    Ok(EmulationCheck { report, graphs, vertices, max_gap, holds: max_gap <= eps })
}

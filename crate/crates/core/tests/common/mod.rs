#![allow(dead_code)]

use expr_lab::gnn::{tape_backward, tape_forward, Aggregation, ComputePlan, Gnn, TapeBatch, UpaMode};
use expr_lab::graph::{make_family, FamilyKind, FamilySpec, FeaturedGraph};
use expr_lab::util::Rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Scalar-output gnn with one aggregation per layer and FNN hidden width `h`.
pub fn scalar_gnn(input_dim: usize, aggs: &[Aggregation], h: usize, w: f64, b: f64, rng: &mut Rng) -> Gnn {
    let m = aggs.len();
    let widths: Vec<usize> = (0..m).map(|i| if i + 1 == m { 1 } else { 3 }).collect();
    let hidden = vec![vec![h]; m];
    let per_layer: Vec<Vec<Aggregation>> = aggs.iter().map(|a| vec![a.clone()]).collect();
    Gnn::random(input_dim, &widths, &hidden, &per_layer, w, b, rng).unwrap()
}

pub fn random_upa(rng: &mut Rng) -> Aggregation {
    let coeffs = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mode = if rng.gen_bool(0.5) { UpaMode::OfX } else { UpaMode::OfBx };
    Aggregation::Upa { coeffs, mode }
}

pub fn random_graph(n: usize, d: usize, rng: &mut Rng) -> FeaturedGraph {
    let p = rng.gen_range(0.2..0.7);
    expr_lab::graph::random_graph(n, d, p, rng).unwrap()
}

/// Star or tripartite graph with one common feature vector: every neighbor
/// multiset is homogeneous at every layer.
pub fn homogeneous_graph(d: usize, rng: &mut Rng) -> FeaturedGraph {
    let k = rng.gen_range(1..6);
    let c = rng.gen_range(1..5);
    let kind = if rng.gen_bool(0.5) { FamilyKind::StarSv } else { FamilyKind::TripartiteSv };
    let g = make_family(FamilySpec::new(kind, k, c).unwrap()).unwrap();
    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let features = (0..g.num_vertices()).flat_map(|_| x.iter().copied()).collect();
    g.with_features(d, features).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// Central differences of the scalar output at `target` against the tape
/// gradient. Parameters whose perturbation changes the ReLU or argmax
/// pattern sit at a kink and are skipped.
pub fn grad_check(gnn: &Gnn, graph: &FeaturedGraph, target: usize) -> GradCheck {
    const H: f64 = 1e-6;
    let plan = ComputePlan::build(graph, target, gnn.depth()).unwrap();
    let batch = TapeBatch::new(&[&plan]).unwrap();
    let (y, cache) = tape_forward(gnn, &batch).unwrap();
    let exact = plan.eval_exact(gnn).unwrap()[0];
    assert!((y[[0, 0]] - exact).abs() <= 1e-12 * exact.abs().max(1.0), "tape {} vs exact {exact}", y[[0, 0]]);
    let sig = cache.signature(gnn);
    let grads = tape_backward(gnn, &batch, &cache, &Array2::ones((1, 1))).unwrap();
    let base = gnn.params();
    let mut probe = gnn.clone();
    let mut eval = |params: &[f64]| {
        probe.set_params(params).unwrap();
        let (y, c) = tape_forward(&probe, &batch).unwrap();
        (y[[0, 0]], c.signature(&probe))
    };
    let mut out = GradCheck { checked: 0, skipped: 0, max_rel_err: 0.0 };
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + H;
        let (up, s_up) = eval(&p);
        p[i] = base[i] - H;
        let (down, s_down) = eval(&p);
        p[i] = base[i];
        if s_up != sig || s_down != sig {
            out.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * H);
        let scale = grads[i].abs().max(numeric.abs()).max(1e-4);
        out.max_rel_err = out.max_rel_err.max((grads[i] - numeric).abs() / scale);
        out.checked += 1;
    }
    out
}

/// Closed form of the threshold indicator in terms of `avg` and `n`.
pub fn indicator_oracle(s: f64, a: f64, n: f64, avg: f64) -> f64 {
    if s <= avg {
        0.0
    } else if s - a / n < avg {
        n * (s - avg) / a
    } else if s - a <= avg {
        1.0
    } else if s - a - a / n < avg {
        1.0 - n * (s - avg - a) / a
    } else {
        0.0
    }
}

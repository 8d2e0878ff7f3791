mod common;

use common::*;
use expr_lab::analysis::{check_description, describe, minimax_gap, DescribeTarget, DEFAULT_SET_CAP};
use expr_lab::gnn::{Aggregation, Gnn};
use expr_lab::graph::{make_family, FamilyKind, FamilySpec, FeaturedGraph};
use expr_lab::neural::batch::forward_batch;
use expr_lab::neural::Fnn;
use expr_lab::util::seeded_rng;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

fn agg_strategy() -> impl Strategy<Value = Aggregation> {
    prop_oneof![Just(Aggregation::Sum), Just(Aggregation::Mean), Just(Aggregation::Max)]
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outputs_follow_vertex_renaming(seed in any::<u64>(), a1 in agg_strategy(), a2 in agg_strategy(), n in 1usize..12) {
        let mut rng = seeded_rng(seed);
        let gnn = scalar_gnn(2, &[a1, a2], 4, 1.0, 0.5, &mut rng);
        let g = random_graph(n, 2, &mut rng);
        let perm = random_permutation(n, &mut rng);
        let h = g.permuted(&perm).unwrap();
        let a = gnn.forward(&g).unwrap();
        let b = gnn.forward(&h).unwrap();
        for (v, &pv) in perm.iter().enumerate() {
            prop_assert_eq!(bits(a.output().row(v)), bits(b.output().row(pv)));
        }
    }

    #[test]
    fn outputs_ignore_edge_order(seed in any::<u64>(), a1 in agg_strategy(), n in 2usize..12) {
        let mut rng = seeded_rng(seed);
        let gnn = scalar_gnn(1, &[a1.clone(), a1], 3, 1.0, 0.5, &mut rng);
        let g = random_graph(n, 1, &mut rng);
        let mut edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b)| if rng.gen_bool(0.5) { (b, a) } else { (a, b) }).collect();
        edges.reverse();
        let h = FeaturedGraph::new(n, 1, edges, g.features().to_vec(), None).unwrap();
        prop_assert_eq!(bits(gnn.forward(&g).unwrap().output().data()), bits(gnn.forward(&h).unwrap().output().data()));
    }

    #[test]
    fn mean_and_max_are_blind_to_star_size(seed in any::<u64>(), max in any::<bool>(), k1 in 1u64..50, k2 in 1u64..5000) {
        let mut rng = seeded_rng(seed);
        let agg = if max { Aggregation::Max } else { Aggregation::Mean };
        let gnn = scalar_gnn(1, &[agg.clone(), agg], 4, 1.0, 0.5, &mut rng);
        let at = |k| gnn.output_at_target(&make_family(FamilySpec::star_sv(k)).unwrap()).unwrap();
        prop_assert_eq!(bits(&at(k1)), bits(&at(k2)));
    }

    #[test]
    fn star_leaves_agree(seed in any::<u64>(), a1 in agg_strategy(), k in 1u64..20, c in 1u64..20) {
        let mut rng = seeded_rng(seed);
        let gnn = scalar_gnn(1, &[a1.clone(), a1], 3, 1.0, 0.5, &mut rng);
        let g = make_family(FamilySpec::star_uc(k, c)).unwrap();
        let out = gnn.forward(&g).unwrap();
        for v in 2..g.num_vertices() {
            prop_assert_eq!(bits(out.output().row(1)), bits(out.output().row(v)));
        }
    }

    #[test]
    fn lipschitz_bound_holds(seed in any::<u64>(), scale in 0.1f64..3.0) {
        let mut rng = seeded_rng(seed);
        let f = Fnn::random_uniform(&[3, 5, 4, 2], 1.0, 0.5, &mut rng).unwrap();
        let l = f.lipschitz_upper();
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fx = f.eval(&x).unwrap();
            let fy = f.eval(&y).unwrap();
            let dout = fx.iter().zip(&fy).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let din = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(dout <= l * din * (1.0 + 1e-12));
        }
        let mut g = f.clone();
        let scaled: Vec<f64> = f.params().iter().map(|p| p * scale).collect();
        g.set_params(&scaled).unwrap();
        let want = l * scale.powi(f.depth() as i32);
        prop_assert!((g.lipschitz_upper() - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn fnn_is_linear_between_kinks(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let f = Fnn::random_uniform(&[2, 6, 6, 1], 1.0, 0.5, &mut rng).unwrap();
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let steps = 1000;
        let mut rows = Array2::zeros((steps + 1, 2));
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            for j in 0..2 {
                rows[[i, j]] = x[j] + t * v[j];
            }
        }
        let (y, cache) = forward_batch(&f, rows.clone());
        let pattern = |i: usize| {
            let (_, c) = forward_batch(&f, rows.slice(ndarray::s![i..i + 1, ..]).to_owned());
            let mut p = Vec::new();
            c.relu_pattern(&f, &mut p);
            p
        };
        drop(cache);
        let pats: Vec<Vec<bool>> = (0..=steps).map(pattern).collect();
        for i in 1..steps {
            if pats[i - 1] == pats[i] && pats[i] == pats[i + 1] {
                let dd = y[[i + 1, 0]] - 2.0 * y[[i, 0]] + y[[i - 1, 0]];
                prop_assert!(dd.abs() < 1e-9, "second difference {dd} at step {i}");
            }
        }
    }

    #[test]
    fn minimax_zero_on_polynomials(seed in any::<u64>(), n in 0usize..4, x in -5i64..5) {
        let mut rng = seeded_rng(seed);
        let coeffs: Vec<f64> = (0..=n).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
        let values: Vec<f64> = (0..n as i64 + 3).map(|i| {
            let y = (x + i) as f64;
            coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
        }).collect();
        let r = minimax_gap(&values, x, n).unwrap();
        prop_assert!(r.gap.abs() <= 1e-9, "gap {}", r.gap);
    }

    #[test]
    fn minimax_scales_with_data(seed in any::<u64>(), lambda in -4.0f64..4.0) {
        let mut rng = seeded_rng(seed);
        let values: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * lambda).collect();
        let a = minimax_gap(&values, 0, 1).unwrap().gap;
        let b = minimax_gap(&scaled, 0, 1).unwrap().gap;
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

#[test]
fn family_counts_match_generated_graphs() {
    for kind in FamilyKind::ALL {
        for k in 1..=20u64 {
            let cs: Vec<u64> = match kind {
                FamilyKind::StarSv => vec![0],
                FamilyKind::StarFlag => vec![0, 1],
                FamilyKind::TripartiteEmbed if k > 8 => vec![1, 5],
                _ => (1..=20).collect(),
            };
            for c in cs {
                let g = make_family(FamilySpec::new(kind, k, c).unwrap()).unwrap();
                let (n, e) = kind.counts(k, c).unwrap();
                assert_eq!((g.num_vertices() as u64, g.num_edges() as u64), (n, e), "{kind} k={k} c={c}");
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = seeded_rng(77);
    for round in 0..40 {
        let agg = match round % 4 {
            0 => Aggregation::Sum,
            1 => Aggregation::Mean,
            2 => Aggregation::Max,
            _ => random_upa(&mut rng),
        };
        let gnn = scalar_gnn(2, &[agg.clone(), agg.clone()], 4, 0.8, 0.3, &mut rng);
        let g = if matches!(agg, Aggregation::Upa { .. }) {
            homogeneous_graph(2, &mut rng)
        } else {
            random_graph(rng.gen_range(1..9), 2, &mut rng)
        };
        let target = rng.gen_range(0..g.num_vertices());
        let r = grad_check(&gnn, &g, target);
        assert!(r.max_rel_err < 1e-4, "{agg}: rel err {}", r.max_rel_err);
        assert!(r.checked > 0);
    }
}

#[test]
fn describing_sets_reproduce_small_sum_gnns() {
    let mut rng = seeded_rng(5);
    for family in [FamilyKind::StarUc, FamilyKind::TripartiteSv] {
        for _ in 0..5 {
            let gnn = scalar_gnn(1, &[Aggregation::Sum, Aggregation::Sum], 2, 1.0, 0.5, &mut rng);
            let sets = describe(&gnn, family, DescribeTarget::Vertex, DEFAULT_SET_CAP).unwrap();
            let check = check_description(&sets, &gnn, family, DescribeTarget::Vertex, 1..=8, 1..=8).unwrap();
            assert!(check.violations.is_empty(), "{family}: {:?}", check.violations.first());
        }
    }
}

#[test]
fn json_model_roundtrip_preserves_outputs() {
    let mut rng = seeded_rng(3);
    let gnn = scalar_gnn(2, &[Aggregation::Max, random_upa(&mut rng)], 3, 1.0, 0.5, &mut rng);
    let back = Gnn::from_json(&gnn.to_json(), "mem").unwrap();
    assert_eq!(bits(&back.params()), bits(&gnn.params()));
    let g = homogeneous_graph(2, &mut rng);
    assert_eq!(
        bits(back.forward(&g).unwrap().output().data()),
        bits(gnn.forward(&g).unwrap().output().data())
    );
}

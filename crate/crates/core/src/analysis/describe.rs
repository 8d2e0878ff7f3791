//! Describing sets: finite sets of polynomials in `(k, c)` that contain the
//! output of a Sum-GNN on every member of a parameterized family.
//!
//! Every family here splits into vertex classes whose members stay
//! indistinguishable at every layer, so the computation is tracked per class.
//! The state is a set of joint branches (one polynomial vector per class);
//! a ReLU whose argument has no fixed sign on `k, c >= 1` splits a branch into
//! the argument itself and zero.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::poly::{Poly2, PolySet};
use crate::error::{Error, Result};
use crate::gnn::{Aggregation, Gnn};
use crate::graph::{make_family, FamilyKind, FamilySpec};
use crate::neural::{Activation, Fnn};

pub const DEFAULT_SET_CAP: usize = 100_000;

/// What the describing set should cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescribeTarget {
    /// Output at the family's target vertex.
    Vertex,
    /// Sum of the final feature map over all vertices.
    SumReadout,
}

/// Class-level view of a family: per-class input feature, class size and
/// neighborhood as `(class, multiplicity)` pairs. Class 0 holds the target.
struct ClassLayout {
    init: Vec<Poly2>,
    size: Vec<Poly2>,
    adjacency: Vec<Vec<(usize, Poly2)>>,
}

fn kpow(i: u32) -> Poly2 {
    Poly2::monomial(i, 0, 1.0)
}

fn layout(kind: FamilyKind) -> Result<ClassLayout> {
    let one = Poly2::constant(1.0);
    let kc = Poly2::monomial(1, 1, 1.0);
    Ok(match kind {
        FamilyKind::StarSv | FamilyKind::StarUc => ClassLayout {
            init: if kind == FamilyKind::StarSv {
                vec![one.clone(), one.clone()]
            } else {
                vec![Poly2::zero(), Poly2::c()]
            },
            size: vec![one.clone(), kpow(1)],
            adjacency: vec![vec![(1, kpow(1))], vec![(0, one)]],
        },
        FamilyKind::BipartiteUc => ClassLayout {
            init: vec![Poly2::zero(), Poly2::c()],
            size: vec![kpow(2), kpow(1)],
            adjacency: vec![vec![(1, kpow(1))], vec![(0, kpow(2))]],
        },
        FamilyKind::TripartiteSv => ClassLayout {
            init: vec![one.clone(), one.clone(), one.clone()],
            size: vec![one.clone(), kpow(1), kc],
            adjacency: vec![
                vec![(1, kpow(1))],
                vec![(0, one), (2, Poly2::c())],
                vec![(1, kpow(1))],
            ],
        },
        FamilyKind::TripartiteEmbed => ClassLayout {
            init: vec![Poly2::zero(), Poly2::zero(), one],
            size: vec![kpow(2), kpow(3), kc.clone()],
            adjacency: vec![
                vec![(1, kpow(3))],
                vec![(0, kpow(2)), (2, kc)],
                vec![(1, kpow(3))],
            ],
        },
        FamilyKind::StarFlag => {
            return Err(Error::Unsupported(
                "star_flag has no (k, c) parameterization to describe".into(),
            ))
        }
    })
}

type Vector = Vec<Poly2>;
/// One polynomial vector per class; classes not needed at a level are empty.
type Branch = Vec<Vector>;

fn vector_key(v: &[Poly2]) -> Vec<Vec<(u32, u32, i64)>> {
    v.iter().map(Poly2::key).collect()
}

fn relu_options(p: Poly2) -> Vec<Poly2> {
    if let Some(x) = p.as_constant() {
        return vec![Poly2::constant(x.max(0.0))];
    }
    if p.is_nonneg_on_domain() {
        vec![p]
    } else if p.is_nonpos_on_domain() {
        vec![Poly2::zero()]
    } else {
        vec![p, Poly2::zero()]
    }
}

/// All polynomial vectors the FNN can output on a symbolic input.
fn symbolic_fnn(fnn: &Fnn, input: Vector, cap: usize, stage: &str) -> Result<Vec<Vector>> {
    let mut current = vec![input];
    for layer in fnn.layers() {
        let mut next: Vec<Vector> = Vec::new();
        let mut seen = HashSet::new();
        for x in &current {
            let mut options: Vec<Vec<Poly2>> = Vec::with_capacity(layer.out_dim());
            for r in 0..layer.out_dim() {
                let mut z = Poly2::constant(layer.bias()[r]);
                for (xi, &w) in x.iter().zip(layer.row(r)) {
                    z.add_scaled(xi, w);
                }
                options.push(match layer.activation() {
                    Activation::Identity => vec![z],
                    Activation::Relu => relu_options(z),
                });
            }
            for combo in cartesian(&options) {
                if seen.insert(vector_key(&combo)) {
                    next.push(combo);
                    if next.len() > cap {
                        return Err(Error::SetExplosion {
                            size: next.len(),
                            cap,
                            stage: stage.to_string(),
                        });
                    }
                }
            }
        }
        current = next;
    }
    Ok(current)
}

fn cartesian<T: Clone>(options: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::with_capacity(options.len())];
    for opts in options {
        let mut grown = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for o in opts {
                let mut v = prefix.clone();
                v.push(o.clone());
                grown.push(v);
            }
        }
        out = grown;
    }
    out
}

/// Describing sets, one per output coordinate, for a Sum-GNN on a family.
pub fn describe(gnn: &Gnn, family: FamilyKind, target: DescribeTarget, cap: usize) -> Result<Vec<PolySet>> {
    if gnn.layers().iter().flat_map(|l| l.aggs()).any(|a| *a != Aggregation::Sum) {
        return Err(Error::Unsupported("describing sets need sum aggregation only".into()));
    }
    if gnn.input_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "family features",
            expected: 1,
            got: gnn.input_dim(),
        });
    }
    let lay = layout(family)?;
    let classes = lay.init.len();
    let m = gnn.depth();

    // needed[i][x]: class x's value after layer i is used
    let mut needed = vec![vec![false; classes]; m + 1];
    match target {
        DescribeTarget::Vertex => needed[m][0] = true,
        DescribeTarget::SumReadout => needed[m] = vec![true; classes],
    }
    for i in (0..m).rev() {
        for x in 0..classes {
            if needed[i + 1][x] {
                needed[i][x] = true;
                for (y, _) in &lay.adjacency[x] {
                    needed[i][*y] = true;
                }
            }
        }
    }

    let start: Branch = (0..classes)
        .map(|x| if needed[0][x] { vec![lay.init[x].clone()] } else { Vec::new() })
        .collect();
    let mut branches = vec![start];
    for (li, layer) in gnn.layers().iter().enumerate() {
        let stage = format!("layer {}", li + 1);
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for b in &branches {
            let mut per_class: Vec<Vec<Vector>> = Vec::with_capacity(classes);
            for x in 0..classes {
                if !needed[li + 1][x] {
                    per_class.push(vec![Vec::new()]);
                    continue;
                }
                let p = layer.input_dim();
                let mut input = b[x].clone();
                let mut agg = vec![Poly2::zero(); p];
                for (y, mult) in &lay.adjacency[x] {
                    for (a, v) in agg.iter_mut().zip(&b[*y]) {
                        *a = a.add(&mult.mul(v));
                    }
                }
                for _ in layer.aggs() {
                    input.extend(agg.iter().cloned());
                }
                per_class.push(symbolic_fnn(layer.fnn(), input, cap, &stage)?);
            }
            for combo in cartesian(&per_class) {
                let key: Vec<_> = combo.iter().map(|v| vector_key(v)).collect();
                if seen.insert(key) {
                    next.push(combo);
                    if next.len() > cap {
                        return Err(Error::SetExplosion {
                            size: next.len(),
                            cap,
                            stage,
                        });
                    }
                }
            }
        }
        branches = next;
    }

    let q = gnn.output_dim();
    let mut out = Vec::with_capacity(q);
    for j in 0..q {
        let polys = branches.iter().map(|b| match target {
            DescribeTarget::Vertex => b[0][j].clone(),
            DescribeTarget::SumReadout => {
                let mut s = Poly2::zero();
                for x in 0..classes {
                    s = s.add(&lay.size[x].mul(&b[x][j]));
                }
                s
            }
        });
        out.push(PolySet::new(polys));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: u64,
    pub c: u64,
    pub coord: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionCheck {
    pub points: usize,
    pub violations: Vec<Violation>,
}

/// Relative tolerance used when matching a network output against a set.
pub const DESCRIBE_REL_TOL: f64 = 1e-6;

/// Evaluates the network on every grid point and lists the outputs that no
/// member of the corresponding set reproduces.
pub fn check_description(
    sets: &[PolySet],
    gnn: &Gnn,
    family: FamilyKind,
    target: DescribeTarget,
    ks: std::ops::RangeInclusive<u64>,
    cs: std::ops::RangeInclusive<u64>,
) -> Result<DescriptionCheck> {
    if sets.len() != gnn.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "describing sets",
            expected: gnn.output_dim(),
            got: sets.len(),
        });
    }
    let mut points = 0;
    let mut violations = Vec::new();
    for k in ks {
        for c in cs.clone() {
            let g = make_family(FamilySpec::new(family, k, c)?)?;
            let y = match target {
                DescribeTarget::Vertex => gnn.output_at_target(&g)?,
                DescribeTarget::SumReadout => {
                    let trace = gnn.forward(&g)?;
                    let map = trace.output();
                    (0..map.dim())
                        .map(|j| {
                            let mut col: Vec<f64> = (0..map.len()).map(|v| map.row(v)[j]).collect();
                            crate::util::canonical_sum(&mut col)
                        })
                        .collect()
                }
            };
            points += 1;
            for (coord, (set, &value)) in sets.iter().zip(&y).enumerate() {
                if !set.matches(k as f64, c as f64, value, DESCRIBE_REL_TOL) {
                    violations.push(Violation { k, c, coord, value });
                }
            }
        }
    }
    Ok(DescriptionCheck { points, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_layer(rows: Vec<Vec<f64>>, hidden: bool) -> Gnn {
        let fnn = if hidden {
            Fnn::new(vec![
                crate::neural::DenseLayer::from_rows(rows, vec![0.0], Activation::Relu).unwrap(),
                crate::neural::DenseLayer::from_rows(vec![vec![1.0]], vec![0.0], Activation::Identity)
                    .unwrap(),
            ])
            .unwrap()
        } else {
            Fnn::linear(rows, vec![0.0]).unwrap()
        };
        Gnn::uniform(vec![fnn], Aggregation::Sum).unwrap()
    }

    #[test]
    fn projection_on_star_uc_is_kc() {
        let gnn = one_layer(vec![vec![0.0, 1.0]], false);
        let sets = describe(&gnn, FamilyKind::StarUc, DescribeTarget::Vertex, DEFAULT_SET_CAP).unwrap();
        assert_eq!(sets[0].polys(), &[Poly2::monomial(1, 1, 1.0)]);
        assert!(sets[0].is_good());
        let check = check_description(&sets, &gnn, FamilyKind::StarUc, DescribeTarget::Vertex, 1..=20, 1..=20)
            .unwrap();
        assert_eq!(check.points, 400);
        assert!(check.violations.is_empty());
    }

    #[test]
    fn relu_of_mixed_sign_branches() {
        // ReLU(k c - 2 k): sign depends on c
        let gnn = Gnn::uniform(
            vec![Fnn::new(vec![
                crate::neural::DenseLayer::from_rows(vec![vec![0.0, 1.0]], vec![-2.0], Activation::Relu)
                    .unwrap(),
                crate::neural::DenseLayer::from_rows(vec![vec![1.0]], vec![0.0], Activation::Identity)
                    .unwrap(),
            ])
            .unwrap()],
            Aggregation::Sum,
        )
        .unwrap();
        let sets = describe(&gnn, FamilyKind::StarUc, DescribeTarget::Vertex, DEFAULT_SET_CAP).unwrap();
        assert_eq!(sets[0].len(), 2);
        let check = check_description(&sets, &gnn, FamilyKind::StarUc, DescribeTarget::Vertex, 1..=10, 1..=10)
            .unwrap();
        assert!(check.violations.is_empty());
    }

    #[test]
    fn relu_of_positive_projection_needs_no_zero_branch() {
        let gnn = one_layer(vec![vec![0.0, 1.0]], true);
        let sets = describe(&gnn, FamilyKind::StarUc, DescribeTarget::Vertex, DEFAULT_SET_CAP).unwrap();
        assert_eq!(sets[0].polys(), &[Poly2::monomial(1, 1, 1.0)]);
    }

    #[test]
    fn zero_weights_give_the_bias() {
        let fnn = Fnn::linear(vec![vec![0.0, 0.0]], vec![0.4]).unwrap();
        let gnn = Gnn::uniform(vec![fnn.clone(), fnn], Aggregation::Sum).unwrap();
        let sets = describe(&gnn, FamilyKind::TripartiteSv, DescribeTarget::Vertex, DEFAULT_SET_CAP).unwrap();
        assert_eq!(sets[0].polys(), &[Poly2::constant(0.4)]);
    }

    #[test]
    fn corrupted_set_is_caught() {
        let gnn = one_layer(vec![vec![0.0, 1.0]], false);
        let bad = vec![PolySet::new([Poly2::monomial(1, 1, 1.5)])];
        let check = check_description(&bad, &gnn, FamilyKind::StarUc, DescribeTarget::Vertex, 1..=5, 1..=5)
            .unwrap();
        assert_eq!(check.violations.len(), 25);
    }

    #[test]
    fn embed_readout_has_no_k3c() {
        let gnn = one_layer(vec![vec![1.0, 1.0]], false);
        let sets = describe(&gnn, FamilyKind::TripartiteEmbed, DescribeTarget::SumReadout, DEFAULT_SET_CAP).unwrap();
        assert!(!sets[0].contains_monomial(3, 1));
        let check = check_description(
            &sets,
            &gnn,
            FamilyKind::TripartiteEmbed,
            DescribeTarget::SumReadout,
            1..=3,
            1..=3,
        )
        .unwrap();
        assert!(check.violations.is_empty());
    }

    #[test]
    fn rejects_non_sum() {
        let fnn = Fnn::linear(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        let gnn = Gnn::uniform(vec![fnn], Aggregation::Mean).unwrap();
        assert!(matches!(
            describe(&gnn, FamilyKind::StarUc, DescribeTarget::Vertex, 10),
            Err(Error::Unsupported(_))
        ));
    }
}

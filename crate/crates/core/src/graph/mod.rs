//! Vertex-featured undirected graphs and the parameterized families built on them.

mod families;
mod io;
mod random;

pub use families::{make_family, FamilyKind, FamilySpec};
pub use io::{read_graph, write_graph};
pub use random::random_graph;

use crate::error::{Error, Result};

/// Undirected simple graph with a `d`-dimensional real feature per vertex and
/// an optional designated target vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturedGraph {
    n: usize,
    d: usize,
    edges: Vec<(usize, usize)>,
    features: Vec<f64>,
    target: Option<usize>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl FeaturedGraph {
    /// Builds a graph from an edge list and row-major `n x d` features.
    /// Edges are stored as given; neighbor lists are sorted by vertex id.
    pub fn new(
        n: usize,
        d: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<f64>,
        target: Option<usize>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                context: "graph features",
                expected: n * d,
                got: features.len(),
            });
        }
        if let Some(t) = target {
            if t >= n {
                return Err(Error::invalid(format!("target {t} out of range for {n} vertices")));
            }
        }
        let mut degree = vec![0usize; n];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edges[{i}] = [{a}, {b}] references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::invalid(format!("edges[{i}] is a self-loop on {a}")));
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for v in 0..n {
            offsets.push(offsets[v] + degree[v]);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adjacency = vec![0usize; offsets[n]];
        for &(a, b) in &edges {
            adjacency[fill[a]] = b;
            fill[a] += 1;
            adjacency[fill[b]] = a;
            fill[b] += 1;
        }
        for v in 0..n {
            let nb = &mut adjacency[offsets[v]..offsets[v + 1]];
            nb.sort_unstable();
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("duplicate edge at vertex {v}")));
            }
        }
        Ok(Self {
            n,
            d,
            edges,
            features,
            target,
            offsets,
            adjacency,
        })
    }

    pub fn from_rows(
        edges: Vec<(usize, usize)>,
        rows: Vec<Vec<f64>>,
        target: Option<usize>,
    ) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("feature rows have different lengths"));
        }
        Self::new(n, d, edges, rows.concat(), target)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn feature(&self, v: usize) -> &[f64] {
        &self.features[v * self.d..(v + 1) * self.d]
    }

    /// Row-major `n x d` feature matrix.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Same structure with vertex `v` renamed to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "vertex permutation",
                expected: self.n,
                got: perm.len(),
            });
        }
        let mut features = vec![0.0; self.features.len()];
        for v in 0..self.n {
            let dst = perm[v];
            features[dst * self.d..(dst + 1) * self.d].copy_from_slice(self.feature(v));
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::new(self.n, self.d, edges, features, self.target.map(|t| perm[t]))
    }

    pub fn with_features(&self, d: usize, features: Vec<f64>) -> Result<Self> {
        Self::new(self.n, d, self.edges.clone(), features, self.target)
    }
}

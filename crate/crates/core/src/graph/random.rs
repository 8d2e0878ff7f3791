use rand::Rng as _;

use super::FeaturedGraph;
use crate::error::{Error, Result};
use crate::util::Rng;

/// Erdős–Rényi graph on `n` vertices with features uniform in `[0,1)^d`.
pub fn random_graph(n: usize, d: usize, edge_prob: f64, rng: &mut Rng) -> Result<FeaturedGraph> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::invalid(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(edge_prob) {
                edges.push((a, b));
            }
        }
    }
    let features = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    FeaturedGraph::new(n, d, edges, features, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn shape_and_range() {
        let g = random_graph(20, 3, 0.5, &mut seeded_rng(0)).unwrap();
        assert_eq!((g.num_vertices(), g.feature_dim()), (20, 3));
        assert!(g.features().iter().all(|x| (0.0..1.0).contains(x)));
        assert_eq!(random_graph(6, 1, 1.0, &mut seeded_rng(1)).unwrap().num_edges(), 15);
        assert!(random_graph(3, 1, 1.5, &mut seeded_rng(1)).is_err());
    }
}

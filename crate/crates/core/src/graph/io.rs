use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeaturedGraph;
use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRepr {
    n: usize,
    d: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<usize>,
}

impl FeaturedGraph {
    pub fn to_json(&self) -> String {
        let repr = GraphRepr {
            n: self.n,
            d: self.d,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            features: self.features.chunks(self.d).map(<[f64]>::to_vec).collect(),
            target: self.target,
        };
        serde_json::to_string(&repr).expect("graph serialization cannot fail")
    }

    /// Parses the JSON graph format. `source_name` labels diagnostics.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            message,
        };
        let repr: GraphRepr = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if repr.features.len() != repr.n {
            return Err(parse_err(format!(
                "field 'features' has {} rows but n = {}",
                repr.features.len(),
                repr.n
            )));
        }
        for (i, row) in repr.features.iter().enumerate() {
            if row.len() != repr.d {
                return Err(parse_err(format!(
                    "field 'features[{i}]' has length {} but d = {}",
                    row.len(),
                    repr.d
                )));
            }
        }
        for (i, e) in repr.edges.iter().enumerate() {
            if e[0] >= repr.n || e[1] >= repr.n {
                return Err(parse_err(format!(
                    "field 'edges[{i}]' = [{}, {}] has an endpoint outside 0..{}",
                    e[0], e[1], repr.n
                )));
            }
        }
        FeaturedGraph::new(
            repr.n,
            repr.d,
            repr.edges.iter().map(|e| (e[0], e[1])).collect(),
            repr.features.concat(),
            repr.target,
        )
        .map_err(|e| parse_err(e.to_string()))
    }
}

pub fn read_graph(path: &Path) -> Result<FeaturedGraph> {
    let text = std::fs::read_to_string(path)?;
    FeaturedGraph::from_json(&text, &path.display().to_string())
}

pub fn write_graph(graph: &FeaturedGraph, path: &Path) -> Result<()> {
    write_atomic(path, graph.to_json().as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_family, FamilySpec};

    #[test]
    fn round_trip_preserves_everything() {
        let g = make_family(FamilySpec::star_uc(3, 7)).unwrap();
        let h = FeaturedGraph::from_json(&g.to_json(), "mem").unwrap();
        assert_eq!(g, h);
        let g = FeaturedGraph::from_rows(vec![(0, 1)], vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]], None)
            .unwrap();
        assert_eq!(g, FeaturedGraph::from_json(&g.to_json(), "mem").unwrap());
    }

    #[test]
    fn dangling_edge_is_reported() {
        let text = r#"{"n":2,"d":1,"edges":[[0,1],[1,2]],"features":[[0],[1]],"target":0}"#;
        let err = FeaturedGraph::from_json(text, "bad.json").unwrap_err().to_string();
        assert!(err.contains("edges[1]"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = FeaturedGraph::from_json("{\"n\": 2,\n \"d\": }", "x.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}

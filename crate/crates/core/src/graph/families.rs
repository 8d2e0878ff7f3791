use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeaturedGraph;
use crate::error::{Error, Result};

/// Largest vertex or edge count a generator will materialise.
const MAX_ELEMENTS: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Star with `k` leaves, every feature 1.
    StarSv,
    /// Star with `k` leaves, center 0, leaves `c`.
    StarUc,
    /// Star with `k` zero leaves plus one extra leaf carrying the flag `b`.
    StarFlag,
    /// Complete bipartite `k^2` zeros against `k` vertices featured `c`.
    BipartiteUc,
    /// Center joined to `k` intermediates, each joined to `c` outer vertices; all features 1.
    TripartiteSv,
    /// `k^2` zeros, `k^3` zeros and `kc` ones in complete bipartite layers.
    TripartiteEmbed,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::StarSv,
        FamilyKind::StarUc,
        FamilyKind::StarFlag,
        FamilyKind::BipartiteUc,
        FamilyKind::TripartiteSv,
        FamilyKind::TripartiteEmbed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::StarSv => "star_sv",
            FamilyKind::StarUc => "star_uc",
            FamilyKind::StarFlag => "star_flag",
            FamilyKind::BipartiteUc => "bipartite_uc",
            FamilyKind::TripartiteSv => "tripartite_sv",
            FamilyKind::TripartiteEmbed => "tripartite_embed",
        }
    }

    /// Whether the family takes a second parameter (`c`, or the flag `b`).
    pub fn takes_second(self) -> bool {
        self != FamilyKind::StarSv
    }

    /// Closed-form vertex and edge counts.
    pub fn counts(self, k: u64, c: u64) -> Option<(u64, u64)> {
        let k2 = k.checked_mul(k)?;
        let k3 = k2.checked_mul(k)?;
        Some(match self {
            FamilyKind::StarSv | FamilyKind::StarUc => (k + 1, k),
            FamilyKind::StarFlag => (k + 2, k + 1),
            FamilyKind::BipartiteUc => (k2 + k, k3),
            FamilyKind::TripartiteSv => (1 + k + c, k.checked_add(k.checked_mul(c)?)?),
            FamilyKind::TripartiteEmbed => {
                let kc = k.checked_mul(c)?;
                let n = k2.checked_add(k3)?.checked_add(kc)?;
                let e = k3.checked_mul(k2)?.checked_add(k3.checked_mul(kc)?)?;
                (n, e)
            }
        })
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown family '{s}'")))
    }
}

/// A family member. `c` holds the flag `b` for [`FamilyKind::StarFlag`] and is
/// ignored by [`FamilyKind::StarSv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub k: u64,
    pub c: u64,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, k: u64, c: u64) -> Result<Self> {
        let spec = Self { kind, k, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn star_sv(k: u64) -> Self {
        Self { kind: FamilyKind::StarSv, k, c: 0 }
    }

    pub fn star_uc(k: u64, c: u64) -> Self {
        Self { kind: FamilyKind::StarUc, k, c }
    }

    pub fn star_flag(k: u64, b: bool) -> Self {
        Self { kind: FamilyKind::StarFlag, k, c: u64::from(b) }
    }

    pub fn bipartite_uc(k: u64, c: u64) -> Self {
        Self { kind: FamilyKind::BipartiteUc, k, c }
    }

    pub fn tripartite_sv(k: u64, c: u64) -> Self {
        Self { kind: FamilyKind::TripartiteSv, k, c }
    }

    pub fn tripartite_embed(k: u64, c: u64) -> Self {
        Self { kind: FamilyKind::TripartiteEmbed, k, c }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid(format!("{}: k must be positive", self.kind)));
        }
        match self.kind {
            FamilyKind::StarSv => {}
            FamilyKind::StarFlag if self.c > 1 => {
                return Err(Error::invalid(format!("star_flag: b must be 0 or 1, got {}", self.c)))
            }
            FamilyKind::StarFlag => {}
            _ if self.c == 0 => {
                return Err(Error::invalid(format!("{}: c must be positive", self.kind)))
            }
            _ => {}
        }
        let (n, e) = self
            .kind
            .counts(self.k, self.c)
            .ok_or_else(|| Error::invalid(format!("{}: size overflows", self.kind)))?;
        if n > MAX_ELEMENTS || e > MAX_ELEMENTS {
            return Err(Error::invalid(format!(
                "{}(k={}, c={}) has {n} vertices and {e} edges, above the limit {MAX_ELEMENTS}",
                self.kind, self.k, self.c
            )));
        }
        Ok(())
    }
}

/// Builds the family member. Vertices are numbered class by class (u-class,
/// then v-class, then w-class); the target is the first u vertex.
pub fn make_family(spec: FamilySpec) -> Result<FeaturedGraph> {
    spec.validate()?;
    let k = spec.k as usize;
    let c = spec.c as usize;
    let cf = spec.c as f64;
    let (features, edges) = match spec.kind {
        FamilyKind::StarSv => (vec![1.0; k + 1], star_edges(k)),
        FamilyKind::StarUc => {
            let mut f = vec![cf; k + 1];
            f[0] = 0.0;
            (f, star_edges(k))
        }
        FamilyKind::StarFlag => {
            let mut f = vec![0.0; k + 2];
            f[k + 1] = cf;
            (f, star_edges(k + 1))
        }
        FamilyKind::BipartiteUc => {
            let nu = k * k;
            let mut f = vec![0.0; nu];
            f.extend(std::iter::repeat_n(cf, k));
            (f, complete_bipartite(0..nu, nu..nu + k))
        }
        FamilyKind::TripartiteSv => {
            let mut e = star_edges(k);
            e.extend(complete_bipartite(1..k + 1, k + 1..k + 1 + c));
            (vec![1.0; 1 + k + c], e)
        }
        FamilyKind::TripartiteEmbed => {
            let (nu, nv, nw) = (k * k, k * k * k, k * c);
            let mut f = vec![0.0; nu + nv];
            f.extend(std::iter::repeat_n(1.0, nw));
            let mut e = complete_bipartite(0..nu, nu..nu + nv);
            e.extend(complete_bipartite(nu..nu + nv, nu + nv..nu + nv + nw));
            (f, e)
        }
    };
    let n = features.len();
    FeaturedGraph::new(n, 1, edges, features, Some(0))
}

fn star_edges(leaves: usize) -> Vec<(usize, usize)> {
    (1..=leaves).map(|i| (0, i)).collect()
}

fn complete_bipartite(
    left: std::ops::Range<usize>,
    right: std::ops::Range<usize>,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for a in left {
        for b in right.clone() {
            out.push((a, b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_sv_five() {
        let g = make_family(FamilySpec::star_sv(5)).unwrap();
        assert_eq!(g.num_vertices(), 6);
        assert_eq!(g.num_edges(), 5);
        assert!(g.features().iter().all(|&x| x == 1.0));
        assert_eq!(g.target(), Some(0));
    }

    #[test]
    fn tripartite_sv_counts() {
        let g = make_family(FamilySpec::tripartite_sv(2, 3)).unwrap();
        assert_eq!(g.num_vertices(), 6);
        assert_eq!(g.num_edges(), 8);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(1), 4);
        assert_eq!(g.degree(5), 2);
    }

    #[test]
    fn star_flag_features() {
        let g = make_family(FamilySpec::star_flag(4, false)).unwrap();
        assert_eq!(g.num_vertices(), 6);
        assert!(g.features().iter().all(|&x| x == 0.0));
        let g = make_family(FamilySpec::star_flag(4, true)).unwrap();
        assert_eq!(g.feature(5), &[1.0]);
        assert_eq!(g.degree(0), 5);
    }

    #[test]
    fn embed_classes() {
        let g = make_family(FamilySpec::tripartite_embed(2, 1)).unwrap();
        assert_eq!(g.num_vertices(), 14);
        assert_eq!(g.num_edges(), 32 + 16);
        assert_eq!(g.features().iter().filter(|&&x| x == 1.0).count(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_family(FamilySpec::star_uc(0, 1)).is_err());
        assert!(make_family(FamilySpec::star_uc(3, 0)).is_err());
        assert!(FamilySpec::new(FamilyKind::StarFlag, 3, 2).is_err());
        assert!(make_family(FamilySpec::tripartite_embed(100_000, 1)).is_err());
        assert_eq!("bipartite_uc".parse::<FamilyKind>().unwrap(), FamilyKind::BipartiteUc);
        assert!("cycle".parse::<FamilyKind>().is_err());
    }
}

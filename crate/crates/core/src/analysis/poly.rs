use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Polynomial in the family parameters `k` and `c`, as a map from exponent
/// pairs `(i, j)` (for `k^i c^j`) to nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), f64>,
}

/// Coefficient resolution used when deciding that two polynomials coincide.
pub const COEFF_TOL: f64 = 1e-9;

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self::monomial(0, 0, value)
    }

    pub fn monomial(i: u32, j: u32, coef: f64) -> Self {
        let mut terms = BTreeMap::new();
        if coef != 0.0 {
            terms.insert((i, j), coef);
        }
        Self { terms }
    }

    pub fn k() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn c() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut p = Self::zero();
        for (e, v) in terms {
            p.add_term(e, v);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&e, &v)| (e, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no `k` or `c` dependence.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&(0, 0)).copied(),
            _ => None,
        }
    }

    /// Every term containing `c` also contains `k`.
    pub fn is_good(&self) -> bool {
        self.terms.keys().all(|&(i, j)| j == 0 || i >= 1)
    }

    fn add_term(&mut self, e: (u32, u32), v: f64) {
        if v == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += v;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&e, &v) in &other.terms {
            out.add_term(e, v);
        }
        out
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, other: &Poly2, s: f64) {
        if s == 0.0 {
            return;
        }
        for (&e, &v) in &other.terms {
            self.add_term(e, s * v);
        }
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        let mut out = Poly2::zero();
        out.add_scaled(self, s);
        out
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(i1, j1), &v1) in &self.terms {
            for (&(i2, j2), &v2) in &other.terms {
                out.add_term((i1 + i2, j1 + j2), v1 * v2);
            }
        }
        out
    }

    pub fn eval(&self, k: f64, c: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), &v)| v * k.powi(i as i32) * c.powi(j as i32))
            .sum()
    }

    /// Nonnegative for all `k, c >= 1`: every coefficient is nonnegative.
    pub fn is_nonneg_on_domain(&self) -> bool {
        self.terms.values().all(|&v| v >= 0.0)
    }

    /// Nonpositive for all `k, c >= 1`: every coefficient is nonpositive.
    pub fn is_nonpos_on_domain(&self) -> bool {
        self.terms.values().all(|&v| v <= 0.0)
    }

    /// Quantized term list used for tolerance-based deduplication.
    pub fn key(&self) -> Vec<(u32, u32, i64)> {
        self.terms
            .iter()
            .filter_map(|(&(i, j), &v)| {
                let q = (v / COEFF_TOL).round();
                (q != 0.0).then_some((i, j, q as i64))
            })
            .collect()
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (n, (&(i, j), &v)) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(if v < 0.0 { " - " } else { " + " })?;
            } else if v < 0.0 {
                f.write_str("-")?;
            }
            write!(f, "{}", v.abs())?;
            match i {
                0 => {}
                1 => f.write_str("*k")?,
                _ => write!(f, "*k^{i}")?,
            }
            match j {
                0 => {}
                1 => f.write_str("*c")?,
                _ => write!(f, "*c^{j}")?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    k: u32,
    c: u32,
    coef: f64,
}

impl Serialize for Poly2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let terms: Vec<TermRepr> = self
            .terms()
            .map(|((k, c), coef)| TermRepr { k, c, coef })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Poly2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let terms = Vec::<TermRepr>::deserialize(d)?;
        Ok(Poly2::from_terms(terms.into_iter().map(|t| ((t.k, t.c), t.coef))))
    }
}

/// Finite set of polynomials, deduplicated up to [`COEFF_TOL`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolySet {
    polys: Vec<Poly2>,
    good: bool,
}

impl PolySet {
    pub fn new(polys: impl IntoIterator<Item = Poly2>) -> Self {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for p in polys {
            if seen.insert(p.key()) {
                out.push(p);
            }
        }
        let good = out.iter().all(Poly2::is_good);
        Self { polys: out, good }
    }

    pub fn polys(&self) -> &[Poly2] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn is_good(&self) -> bool {
        self.good
    }

    /// Some member evaluates to `y` at `(k, c)` within relative tolerance `rel`.
    pub fn matches(&self, k: f64, c: f64, y: f64, rel: f64) -> bool {
        let tol = rel * y.abs().max(1.0);
        self.polys.iter().any(|p| (p.eval(k, c) - y).abs() <= tol)
    }

    /// Some member has a nonzero `k^i c^j` coefficient (beyond [`COEFF_TOL`]).
    pub fn contains_monomial(&self, i: u32, j: u32) -> bool {
        self.polys.iter().any(|p| p.coefficient(i, j).abs() > COEFF_TOL)
    }
}

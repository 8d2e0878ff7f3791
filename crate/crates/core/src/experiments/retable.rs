use std::collections::BTreeMap;

use super::{ModelKind, Task};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "task,model,seed,k,c,re";

#[derive(Debug, Clone, PartialEq)]
pub struct ReEntry {
    pub task: Task,
    pub model: ModelKind,
    pub seed: u64,
    pub k: u64,
    pub c: u64,
    pub re: f64,
}

/// Median and mean of the seeds' errors at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReSummary {
    pub median: f64,
    pub mean: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReTable {
    entries: Vec<ReEntry>,
}

impl ReTable {
    pub fn new(entries: Vec<ReEntry>) -> Self {
        Self { entries }
    }

    /// `|y - truth| / |truth|`.
    pub fn relative_error(y: f64, truth: f64) -> f64 {
        (y - truth).abs() / truth.abs()
    }

    pub fn entries(&self) -> &[ReEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: ReTable) {
        self.entries.extend(other.entries);
    }

    /// Aggregates per `(task, model, k, c)`, sorted by that key.
    pub fn aggregates(&self) -> BTreeMap<(Task, ModelKind, u64, u64), ReSummary> {
        let mut groups: BTreeMap<_, Vec<f64>> = BTreeMap::new();
        for e in &self.entries {
            groups.entry((e.task, e.model, e.k, e.c)).or_default().push(e.re);
        }
        groups.into_iter().map(|(key, v)| (key, summarize(&v))).collect()
    }

    /// Median over every entry; NaN for an empty table.
    pub fn median(&self) -> f64 {
        let v: Vec<f64> = self.entries.iter().map(|e| e.re).collect();
        median(&v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{},{},{}\n", e.task, e.model, e.seed, e.k, e.c, e.re));
        }
        out
    }

    pub fn from_csv(text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            message: format!("line {line}: {message}"),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == METRICS_HEADER => {}
            Some((_, h)) => return Err(parse_err(1, format!("expected header '{METRICS_HEADER}', found '{h}'"))),
            None => return Err(parse_err(1, "empty metrics file".into())),
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(parse_err(i + 1, format!("expected 6 fields, found {}", f.len())));
            }
            let num = |s: &str, name: &str| s.parse::<u64>().map_err(|_| parse_err(i + 1, format!("bad {name} '{s}'")));
            let re: f64 = f[5].parse().map_err(|_| parse_err(i + 1, format!("bad re '{}'", f[5])))?;
            if !(re >= 0.0) {
                return Err(parse_err(i + 1, format!("re must be nonnegative, found {re}")));
            }
            entries.push(ReEntry {
                task: f[0].parse().map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
                model: f[1].parse().map_err(|e: Error| parse_err(i + 1, e.to_string()))?,
                seed: num(f[2], "seed")?,
                k: num(f[3], "k")?,
                c: num(f[4], "c")?,
                re,
            });
        }
        Ok(Self { entries })
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(values: &[f64]) -> ReSummary {
    ReSummary {
        median: median(values),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        seeds: values.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seed: u64, k: u64, c: u64, re: f64) -> ReEntry {
        ReEntry { task: Task::Uc, model: ModelKind::Sum, seed, k, c, re }
    }

    #[test]
    fn relative_error_formula() {
        assert!((ReTable::relative_error(110.0, 100.0) - 0.1).abs() < 1e-15);
        assert_eq!(ReTable::relative_error(0.0, 37.0), 1.0);
    }

    #[test]
    fn aggregates_match_entries() {
        let t = ReTable::new(vec![entry(0, 1, 2, 0.1), entry(1, 1, 2, 0.3), entry(2, 1, 2, 0.8), entry(0, 2, 2, 0.5)]);
        let agg = t.aggregates();
        let s = agg[&(Task::Uc, ModelKind::Sum, 1, 2)];
        assert_eq!(s.seeds, 3);
        assert_eq!(s.median, 0.3);
        assert!((s.mean - 0.4).abs() < 1e-15);
        assert_eq!(agg[&(Task::Uc, ModelKind::Sum, 2, 2)].median, 0.5);
        assert_eq!(t.median(), 0.4);
    }

    #[test]
    fn csv_roundtrip() {
        let t = ReTable::new(vec![entry(0, 1, 2, 0.125), entry(4, 31, 99, 1e-7)]);
        let back = ReTable::from_csv(&t.to_csv(), "mem").unwrap();
        assert_eq!(back, t);
        assert!(ReTable::from_csv("a,b\n", "x").is_err());
        let err = ReTable::from_csv("task,model,seed,k,c,re\nuc,sum,0,1,x,0.1\n", "m.csv").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}

//! Extrapolation experiments: predict the leaf value `c` at the center of
//! star graphs (UC) or of tripartite graphs (SV), train on small parameters
//! and measure relative error on larger ones.

mod retable;
mod train;

pub use retable::{ReEntry, ReSummary, ReTable, METRICS_HEADER};
pub use train::{
    build_model, evaluate_re, make_dataset, run_experiment, smooth_l1, train, CandidateRun, EpochRecord, Sample,
    ExperimentRun, TrainOutcome, HISTORY_HEADER,
};

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FamilyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Star with `k` leaves featured `c`; the center must output `c`.
    Uc,
    /// Center, `k` intermediates, `c` outer vertices; the center must output `c`.
    Sv,
}

impl Task {
    pub fn family(self) -> FamilyKind {
        match self {
            Task::Uc => FamilyKind::StarUc,
            Task::Sv => FamilyKind::TripartiteSv,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Uc => "uc",
            Task::Sv => "sv",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uc" => Ok(Task::Uc),
            "sv" => Ok(Task::Sv),
            _ => Err(Error::invalid(format!("unknown task '{s}' (expected uc or sv)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Sum,
    Mean,
    /// Sum aggregation in odd layers, mean in even layers.
    SumMean,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sum => "sum",
            ModelKind::Mean => "mean",
            ModelKind::SumMean => "sum_mean",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(ModelKind::Sum),
            "mean" => Ok(ModelKind::Mean),
            "sum_mean" | "sum-mean" => Ok(ModelKind::SumMean),
            _ => Err(Error::invalid(format!("unknown model '{s}' (expected sum, mean or sum_mean)"))),
        }
    }
}

/// Inclusive integer range used for `k` and `c` grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub lo: u64,
    pub hi: u64,
}

impl Span {
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("range {lo}..={hi} must be nonempty and start at 1 or more")));
        }
        Ok(Self { lo, hi })
    }

    pub fn iter(&self) -> RangeInclusive<u64> {
        self.lo..=self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

impl FromStr for Span {
    type Err = Error;

    /// Accepts `a..b`, `a-b` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad range bound '{t}' in '{s}'")))
        };
        let (lo, hi) = if let Some((a, b)) = s.split_once("..") {
            (parse(a)?, parse(b.trim_start_matches('='))?)
        } else if let Some((a, b)) = s.split_once('-') {
            (parse(a)?, parse(b)?)
        } else {
            let v = parse(s)?;
            (v, v)
        };
        Span::new(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub model: ModelKind,
    pub train_k: Span,
    pub train_c: Span,
    pub test_k: Span,
    pub test_c: Span,
    pub hidden_dim: usize,
    pub layers: usize,
    /// Feed both sum and mean slots to every layer instead of alternating.
    pub both_slots: bool,
    pub seeds: Vec<u64>,
}

impl TaskSpec {
    /// Desk-scale defaults: hidden 64, train `[1..30]^2`, test `[31..100]^2`, 3 seeds.
    pub fn desk(task: Task, model: ModelKind) -> Self {
        Self {
            task,
            model,
            train_k: Span { lo: 1, hi: 30 },
            train_c: Span { lo: 1, hi: 30 },
            test_k: Span { lo: 31, hi: 100 },
            test_c: Span { lo: 31, hi: 100 },
            hidden_dim: 64,
            layers: 2,
            both_slots: false,
            seeds: vec![0, 1, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.layers == 0 {
            return Err(Error::invalid("hidden_dim and layers must be positive"));
        }
        if self.model == ModelKind::SumMean && self.layers < 2 && !self.both_slots {
            return Err(Error::invalid("sum_mean with alternating slots needs at least 2 layers"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_candidates: Vec<f64>,
    pub val_fraction: f64,
    pub smooth_l1_beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 100,
            lr_candidates: vec![1e-3, 1e-4, 1e-5],
            val_fraction: 0.05,
            smooth_l1_beta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.lr_candidates.is_empty() || self.lr_candidates.iter().any(|&lr| !(lr > 0.0)) {
            return Err(Error::invalid("learning rate candidates must be positive"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid("val_fraction must lie in [0, 1)"));
        }
        if !(self.smooth_l1_beta > 0.0) {
            return Err(Error::invalid("smooth-L1 beta must be positive"));
        }
        Ok(())
    }
}

/// Flat `key=value` lines describing a run.
pub fn config_lines(spec: &TaskSpec, cfg: &TrainConfig) -> String {
    let lrs: Vec<String> = cfg.lr_candidates.iter().map(|x| x.to_string()).collect();
    let seeds: Vec<String> = spec.seeds.iter().map(|x| x.to_string()).collect();
    let mut out = String::new();
    for (k, v) in [
        ("task", spec.task.to_string()),
        ("model", spec.model.to_string()),
        ("train_k", spec.train_k.to_string()),
        ("train_c", spec.train_c.to_string()),
        ("test_k", spec.test_k.to_string()),
        ("test_c", spec.test_c.to_string()),
        ("hidden_dim", spec.hidden_dim.to_string()),
        ("layers", spec.layers.to_string()),
        ("both_slots", spec.both_slots.to_string()),
        ("seeds", seeds.join(",")),
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("lr_candidates", lrs.join(",")),
        ("val_fraction", cfg.val_fraction.to_string()),
        ("smooth_l1_beta", cfg.smooth_l1_beta.to_string()),
    ] {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_helpers() {
        assert_eq!("1..30".parse::<Span>().unwrap(), Span { lo: 1, hi: 30 });
        assert_eq!("31-100".parse::<Span>().unwrap(), Span { lo: 31, hi: 100 });
        assert_eq!("7".parse::<Span>().unwrap(), Span { lo: 7, hi: 7 });
        assert!("0..3".parse::<Span>().is_err());
        assert!("5..3".parse::<Span>().is_err());
        assert_eq!("SV".parse::<Task>().unwrap(), Task::Sv);
        assert_eq!("sum_mean".parse::<ModelKind>().unwrap(), ModelKind::SumMean);
    }

    #[test]
    fn config_echo() {
        let text = config_lines(&TaskSpec::desk(Task::Uc, ModelKind::Mean), &TrainConfig::default());
        assert!(text.contains("task=uc\n"));
        assert!(text.contains("lr_candidates=0.001,0.0001,0.00001\n"));
        assert!(text.lines().all(|l| l.split_once('=').is_some()));
    }
}

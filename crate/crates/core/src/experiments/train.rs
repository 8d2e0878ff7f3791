use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::retable::{ReEntry, ReTable};
use super::{config_lines, ModelKind, Span, Task, TaskSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::gnn::{tape_backward, tape_forward, Aggregation, ComputePlan, Gnn, GnnLayer, TapeBatch};
use crate::graph::{make_family, FamilySpec, FeaturedGraph};
use crate::neural::{adam_step, AdamState, Fnn};
use crate::util::{seeded_rng, write_atomic};

pub const HISTORY_HEADER: &str = "task,model,seed,lr,epoch,train_loss,val_loss";

/// One dataset element: the graph, its ground truth and the vertex it is read at.
#[derive(Debug, Clone)]
pub struct Sample {
    pub k: u64,
    pub c: u64,
    pub graph: FeaturedGraph,
    pub target: f64,
    pub target_vertex: usize,
}

/// One graph per `(k, c)` in the grid, `k` outer and `c` inner.
pub fn make_dataset(task: Task, ks: Span, cs: Span) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(ks.len() * cs.len());
    for k in ks.iter() {
        for c in cs.iter() {
            out.push(make_sample(task, k, c)?);
        }
    }
    Ok(out)
}

fn make_sample(task: Task, k: u64, c: u64) -> Result<Sample> {
    let graph = make_family(FamilySpec::new(task.family(), k, c)?)?;
    let target_vertex = graph.target().unwrap_or(0);
    Ok(Sample { k, c, graph, target: c as f64, target_vertex })
}

fn layer_aggs(model: ModelKind, layer: usize, both_slots: bool) -> Vec<Aggregation> {
    match model {
        ModelKind::Sum => vec![Aggregation::Sum],
        ModelKind::Mean => vec![Aggregation::Mean],
        ModelKind::SumMean if both_slots => vec![Aggregation::Sum, Aggregation::Mean],
        ModelKind::SumMean if layer.is_multiple_of(2) => vec![Aggregation::Sum],
        ModelKind::SumMean => vec![Aggregation::Mean],
    }
}

/// Freshly initialised model: every layer is a 2-layer ReLU MLP, hidden
/// layers output `hidden_dim` features and the last one a scalar.
pub fn build_model(spec: &TaskSpec, seed: u64) -> Result<Gnn> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let mut layers = Vec::with_capacity(spec.layers);
    let mut p = 1;
    for l in 0..spec.layers {
        let aggs = layer_aggs(spec.model, l, spec.both_slots);
        let out = if l + 1 == spec.layers { 1 } else { spec.hidden_dim };
        let fnn = Fnn::mlp_init(&[p * (1 + aggs.len()), spec.hidden_dim, out], &mut rng)?;
        layers.push(GnnLayer::new(fnn, aggs)?);
        p = out;
    }
    Gnn::new(layers, None)
}

/// Smooth-L1 loss of a residual and its derivative.
pub fn smooth_l1(residual: f64, beta: f64) -> (f64, f64) {
    let a = residual.abs();
    if a < beta {
        (0.5 * residual * residual / beta, residual / beta)
    } else {
        (a - 0.5 * beta, residual.signum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub lr: f64,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct CandidateRun {
    pub lr: f64,
    pub best_val: f64,
    pub diverged: bool,
    pub params: Vec<f64>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Gnn,
    pub lr: f64,
    pub best_val: f64,
    /// Per-epoch records of every candidate, in candidate order.
    pub history: Vec<EpochRecord>,
}

struct Prepared {
    plans: Vec<ComputePlan>,
    targets: Vec<f64>,
}

impl Prepared {
    fn batch(&self, idx: &[usize]) -> Result<(TapeBatch, Vec<f64>)> {
        let plans: Vec<&ComputePlan> = idx.iter().map(|&i| &self.plans[i]).collect();
        let targets = idx.iter().map(|&i| self.targets[i]).collect();
        Ok((TapeBatch::new(&plans)?, targets))
    }
}

fn batch_loss(gnn: &Gnn, batch: &TapeBatch, targets: &[f64], beta: f64) -> Result<f64> {
    let (y, _) = tape_forward(gnn, batch)?;
    let mut total = 0.0;
    for (b, &t) in targets.iter().enumerate() {
        total += smooth_l1(y[[b, 0]] - t, beta).0;
    }
    Ok(total / targets.len() as f64)
}

fn candidate_seed(seed: u64, idx: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx as u64 + 1)
}

fn run_candidate(
    init: &Gnn,
    data: &Prepared,
    train_idx: &[usize],
    val: Option<&(TapeBatch, Vec<f64>)>,
    cfg: &TrainConfig,
    lr: f64,
    rng_seed: u64,
) -> Result<CandidateRun> {
    let mut gnn = init.clone();
    let mut params = gnn.params();
    let batches_per_epoch = train_idx.len().div_ceil(cfg.batch_size);
    let mut adam = AdamState::new(params.len(), lr, cfg.epochs * batches_per_epoch)?;
    let mut rng = seeded_rng(rng_seed);
    let mut order = train_idx.to_vec();
    let mut best = (f64::INFINITY, params.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    let beta = cfg.smooth_l1_beta;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, targets) = data.batch(chunk)?;
            let (y, cache) = tape_forward(&gnn, &batch)?;
            let n = chunk.len() as f64;
            let mut d_out = Array2::zeros((chunk.len(), 1));
            for (b, &t) in targets.iter().enumerate() {
                let (l, g) = smooth_l1(y[[b, 0]] - t, beta);
                loss_sum += l;
                d_out[[b, 0]] = g / n;
            }
            let grads = tape_backward(&gnn, &batch, &cache, &d_out)?;
            adam_step(&mut params, &grads, &mut adam)?;
            gnn.set_params(&params)?;
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = match val {
            Some((batch, targets)) => batch_loss(&gnn, batch, targets, beta)?,
            None => train_loss,
        };
        history.push(EpochRecord { lr, epoch: epoch + 1, train_loss, val_loss });
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Ok(CandidateRun { lr, best_val: f64::NAN, diverged: true, params: best.1, history });
        }
        if val_loss < best.0 {
            best = (val_loss, params.clone());
        }
    }
    Ok(CandidateRun { lr, best_val: best.0, diverged: false, params: best.1, history })
}

/// Trains one model for `seed`: shuffled validation split, one Adam run per
/// learning-rate candidate, and the checkpoint with the lowest validation
/// loss across all candidates.
pub fn train(spec: &TaskSpec, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let samples = make_dataset(spec.task, spec.train_k, spec.train_c)?;
    train_on(spec, cfg, seed, &samples)
}

pub(crate) fn train_on(spec: &TaskSpec, cfg: &TrainConfig, seed: u64, samples: &[Sample]) -> Result<TrainOutcome> {
    let init = build_model(spec, seed)?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome { model: init, lr: cfg.lr_candidates[0], best_val: f64::NAN, history: Vec::new() });
    }
    let n = samples.len();
    let n_val = if cfg.val_fraction > 0.0 { ((cfg.val_fraction * n as f64).round() as usize).max(1) } else { 0 };
    if n_val >= n {
        return Err(Error::TooFewSamples { needed: n_val + 1, got: n });
    }
    let plans = samples
        .iter()
        .map(|s| ComputePlan::build(&s.graph, s.target_vertex, spec.layers))
        .collect::<Result<Vec<_>>>()?;
    let data = Prepared { plans, targets: samples.iter().map(|s| s.target).collect() };

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded_rng(seed ^ 0x5EED_5A17));
    let (val_idx, train_idx) = idx.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();
    let mut val_idx = val_idx.to_vec();
    val_idx.sort_unstable();
    let val = if val_idx.is_empty() { None } else { Some(data.batch(&val_idx)?) };

    let runs = cfg
        .lr_candidates
        .par_iter()
        .enumerate()
        .map(|(i, &lr)| run_candidate(&init, &data, &train_idx, val.as_ref(), cfg, lr, candidate_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;

    let mut chosen: Option<&CandidateRun> = None;
    for run in runs.iter().filter(|r| !r.diverged) {
        if chosen.is_none_or(|c| run.best_val < c.best_val) {
            chosen = Some(run);
        }
    }
    let Some(best) = chosen else {
        return Err(Error::Diverged { lr: runs[0].lr });
    };
    let mut model = init;
    model.set_params(&best.params)?;
    let (lr, best_val) = (best.lr, best.best_val);
    let history = runs.into_iter().flat_map(|r| r.history).collect();
    Ok(TrainOutcome { model, lr, best_val, history })
}

/// Relative error at the target vertex over a `(k, c)` grid.
pub fn evaluate_re(gnn: &Gnn, task: Task, model: ModelKind, seed: u64, ks: Span, cs: Span) -> Result<ReTable> {
    let mut points = Vec::with_capacity(ks.len() * cs.len());
    for k in ks.iter() {
        for c in cs.iter() {
            points.push((k, c));
        }
    }
    let entries = points
        .par_iter()
        .map(|&(k, c)| {
            let s = make_sample(task, k, c)?;
            let y = gnn.output_at(&s.graph, s.target_vertex)?[0];
            Ok(ReEntry { task, model, seed, k, c, re: ReTable::relative_error(y, s.target) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReTable::new(entries))
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub models: Vec<(u64, TrainOutcome)>,
    pub table: ReTable,
}

impl ExperimentRun {
    pub fn history_csv(&self, spec: &TaskSpec) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for (seed, o) in &self.models {
            for r in &o.history {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    spec.task, spec.model, seed, r.lr, r.epoch, r.train_loss, r.val_loss
                ));
            }
        }
        out
    }
}

/// Trains one model per seed, evaluates each on the test grid and, when
/// `out_dir` is given, writes `<task>_<model>_{metrics.csv,history.csv,config.txt}`
/// plus one model JSON per seed.
pub fn run_experiment(spec: &TaskSpec, cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<ExperimentRun> {
    spec.validate()?;
    cfg.validate()?;
    let samples = make_dataset(spec.task, spec.train_k, spec.train_c)?;
    let mut models = Vec::with_capacity(spec.seeds.len());
    let mut entries = Vec::new();
    for &seed in &spec.seeds {
        let outcome = train_on(spec, cfg, seed, &samples)?;
        let table = evaluate_re(&outcome.model, spec.task, spec.model, seed, spec.test_k, spec.test_c)?;
        entries.extend(table.entries().iter().cloned());
        models.push((seed, outcome));
    }
    let run = ExperimentRun { models, table: ReTable::new(entries) };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}_{}", spec.task, spec.model);
        write_atomic(&dir.join(format!("{stem}_metrics.csv")), run.table.to_csv().as_bytes())?;
        write_atomic(&dir.join(format!("{stem}_history.csv")), run.history_csv(spec).as_bytes())?;
        write_atomic(&dir.join(format!("{stem}_config.txt")), config_lines(spec, cfg).as_bytes())?;
        for (seed, o) in &run.models {
            write_atomic(&dir.join(format!("{stem}_seed{seed}.json")), o.model.to_json().as_bytes())?;
        }
    }
    Ok(run)
}

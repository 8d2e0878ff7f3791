use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use expr_lab::analysis::{
    check_description, counterexample_search, describe, minimax_gap, pieces_on_family, DescribeTarget, GridBudget,
    DEFAULT_SET_CAP,
};
use expr_lab::constructions::{compile_to_sum, verify_emulation, verify_growth, verify_sandwich, CompileOptions};
use expr_lab::experiments::{evaluate_re, run_experiment, ModelKind, Span, Task, TaskSpec, TrainConfig};
use expr_lab::gnn::{Aggregation, Gnn};
use expr_lab::graph::{make_family, FamilyKind, FamilySpec};
use expr_lab::report::{write_report, ReportOptions};
use expr_lab::util::{seeded_rng, write_atomic};
use expr_lab::Error;

#[derive(Parser)]
#[command(name = "expr-lab", version, about = "Aggregation expressivity laboratory for graph neural networks")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a family graph as JSON.
    Gen(GenArgs),
    /// Compile a Mean-GNN or Max-GNN into a Sum-GNN.
    Compile(CompileArgs),
    /// Numerically check sandwich, growth or emulation bounds.
    Verify(VerifyArgs),
    /// Describing sets, piece counts, minimax gaps and counterexample search.
    Analyze(AnalyzeArgs),
    /// Train and evaluate models on the UC or SV task.
    Train(TrainArgs),
    /// Relative-error grid of a saved model.
    Eval(EvalArgs),
    /// Aggregate metrics CSVs into per-k tables and plots.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: FamilyKind,
    #[arg(long)]
    k: u64,
    /// Second family parameter (the flag for star_flag).
    #[arg(long)]
    c: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    eps: f64,
    /// Compiled model path; the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = CompileOptions::default().max_gadget_units)]
    max_gadget_units: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Sandwich,
    Growth,
    Emulation,
}

#[derive(Clone, Copy, ValueEnum)]
enum GadgetAgg {
    Mean,
    Max,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    kind: VerifyKind,
    /// Source model (growth, emulation).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Gadget aggregation (sandwich).
    #[arg(long, value_enum, default_value_t = GadgetAgg::Mean)]
    agg: GadgetAgg,
    /// Feature dimension (sandwich).
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    graphs: usize,
    #[arg(long, default_value_t = 50)]
    max_vertices: usize,
    /// Star sizes (growth).
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 10, 1000, 1_000_000])]
    ks: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeKind {
    Describe,
    Pieces,
    Minimax,
    Counterexample,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetFn {
    C,
    K,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    kind: AnalyzeKind,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "star_uc")]
    family: FamilyKind,
    /// Describe the sum over all vertices instead of the target vertex.
    #[arg(long)]
    sum_readout: bool,
    #[arg(long, default_value_t = DEFAULT_SET_CAP)]
    cap: usize,
    /// Grid checked against the describing sets.
    #[arg(long)]
    check_k: Option<Span>,
    #[arg(long)]
    check_c: Option<Span>,
    /// Sampled k range (pieces).
    #[arg(long, default_value = "1..200")]
    k: Span,
    /// Fixed second parameter (pieces).
    #[arg(long, default_value_t = 1)]
    c: u64,
    #[arg(long, default_value_t = 3)]
    max_degree: usize,
    /// Samples `f(x), f(x+1), ...` (minimax).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    x: i64,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Function the network should compute (counterexample).
    #[arg(long, value_enum, default_value_t = TargetFn::C)]
    target: TargetFn,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    k_max: u64,
    #[arg(long, default_value_t = 10_000)]
    c_max: u64,
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value = "1..30")]
    train_k: Span,
    #[arg(long, default_value = "1..30")]
    train_c: Span,
    #[arg(long, default_value = "31..100")]
    test_k: Span,
    #[arg(long, default_value = "31..100")]
    test_c: Span,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    task: Task,
    #[arg(long)]
    model: ModelKind,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Give every layer both sum and mean slots (sum_mean only).
    #[arg(long)]
    both_slots: bool,
    /// Seeds used are `seed, seed+1, ...`.
    #[arg(long, default_value_t = 3)]
    num_seeds: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-4, 1e-5])]
    lr: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    val_fraction: f64,
    /// Run directory for metrics, history, config and models.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    task: Task,
    /// Label written to the CSV; inferred from the aggregations when omitted.
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long, default_value = "31..100")]
    grid_k: Span,
    #[arg(long, default_value = "31..100")]
    grid_c: Span,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    runs: PathBuf,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    #[arg(long, value_delimiter = ',')]
    k: Vec<u64>,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Ok(write_atomic(p, text.as_bytes())?)
        }
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn load_model(path: Option<&PathBuf>) -> Result<Gnn, Box<dyn std::error::Error>> {
    let path = path.ok_or("--model is required for this kind")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Gnn::from_json(&text, &path.display().to_string())?)
}

fn gen(a: GenArgs) -> CliResult {
    let c = match (a.family.takes_second(), a.c) {
        (true, Some(c)) => c,
        (true, None) => return Err(format!("family {} needs --c", a.family).into()),
        (false, _) => 0,
    };
    let g = make_family(FamilySpec::new(a.family, a.k, c)?)?;
    emit(a.out.as_deref(), &g.to_json())?;
    Ok(())
}

fn compile(a: CompileArgs) -> CliResult {
    let src = load_model(Some(&a.model))?;
    let (sum, report) = compile_to_sum(&src, a.eps, CompileOptions { max_gadget_units: a.max_gadget_units })?;
    if let Some(out) = &a.out {
        emit(Some(out), &sum.to_json())?;
    }
    println!("{}", to_json(&report)?);
    Ok(())
}

fn verify(a: VerifyArgs, seed: u64) -> CliResult {
    let mut rng = seeded_rng(seed);
    let (text, ok, what) = match a.kind {
        VerifyKind::Sandwich => {
            let agg = match a.agg {
                GadgetAgg::Mean => Aggregation::Mean,
                GadgetAgg::Max => Aggregation::Max,
            };
            let r = verify_sandwich(&agg, a.eps, a.d, a.graphs, a.max_vertices, &mut rng)?;
            (to_json(&r)?, r.violations == 0, format!("{} sandwich violations", r.violations))
        }
        VerifyKind::Growth => {
            let r = verify_growth(&load_model(a.model.as_ref())?, &a.ks)?;
            (to_json(&r)?, r.holds, format!("output exceeds growth bound {}", r.bound))
        }
        VerifyKind::Emulation => {
            let r = verify_emulation(&load_model(a.model.as_ref())?, a.eps, a.graphs, a.max_vertices, &mut rng)?;
            (to_json(&r)?, r.holds, format!("sampled gap {} exceeds {}", r.max_gap, a.eps))
        }
    };
    emit(a.out.as_deref(), &text)?;
    if ok {
        Ok(())
    } else {
        Err(Box::new(CheckFailed(what)))
    }
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let text = match a.kind {
        AnalyzeKind::Minimax => {
            if a.values.is_empty() {
                return Err("--values is required for minimax".into());
            }
            to_json(&minimax_gap(&a.values, a.x, a.degree)?)?
        }
        AnalyzeKind::Describe => {
            let gnn = load_model(a.model.as_ref())?;
            let target = if a.sum_readout { DescribeTarget::SumReadout } else { DescribeTarget::Vertex };
            let sets = describe(&gnn, a.family, target, a.cap)?;
            let check = match (a.check_k, a.check_c) {
                (Some(k), Some(c)) => Some(check_description(&sets, &gnn, a.family, target, k.iter(), c.iter())?),
                (Some(k), None) => Some(check_description(&sets, &gnn, a.family, target, k.iter(), 1..=1)?),
                _ => None,
            };
            let good: Vec<bool> = sets.iter().map(|s| s.is_good()).collect();
            to_json(&serde_json::json!({ "sets": sets, "good": good, "check": check }))?
        }
        AnalyzeKind::Pieces => {
            let gnn = load_model(a.model.as_ref())?;
            to_json(&pieces_on_family(&gnn, a.family, a.k.iter(), a.c, a.max_degree)?)?
        }
        AnalyzeKind::Counterexample => {
            let gnn = load_model(a.model.as_ref())?;
            let budget = GridBudget { k_max: a.k_max, c_max: a.c_max, factor: a.factor };
            let witness = match a.target {
                TargetFn::C => counterexample_search(&gnn, a.family, |_, c| c as f64, a.eps, budget)?,
                TargetFn::K => counterexample_search(&gnn, a.family, |k, _| k as f64, a.eps, budget)?,
            };
            to_json(&serde_json::json!({ "eps": a.eps, "budget": budget, "witness": witness }))?
        }
    };
    emit(a.out.as_deref(), &text)?;
    Ok(())
}

fn train(a: TrainArgs, seed: u64) -> CliResult {
    let spec = TaskSpec {
        task: a.task,
        model: a.model,
        train_k: a.grid.train_k,
        train_c: a.grid.train_c,
        test_k: a.grid.test_k,
        test_c: a.grid.test_c,
        hidden_dim: a.hidden,
        layers: a.layers,
        both_slots: a.both_slots,
        seeds: (0..a.num_seeds).map(|i| seed + i).collect(),
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr_candidates: a.lr,
        val_fraction: a.val_fraction,
        ..TrainConfig::default()
    };
    let run = run_experiment(&spec, &cfg, Some(&a.out))?;
    for (s, o) in &run.models {
        eprintln!("seed {s}: lr {} best validation loss {}", o.lr, o.best_val);
    }
    println!("median test RE {}", run.table.median());
    Ok(())
}

fn infer_kind(gnn: &Gnn) -> ModelKind {
    match gnn.uniform_aggregation() {
        Some(Aggregation::Sum) => ModelKind::Sum,
        Some(Aggregation::Mean) => ModelKind::Mean,
        _ => ModelKind::SumMean,
    }
}

fn eval(a: EvalArgs, seed: u64) -> CliResult {
    let gnn = load_model(Some(&a.model))?;
    let kind = a.kind.unwrap_or_else(|| infer_kind(&gnn));
    let table = evaluate_re(&gnn, a.task, kind, seed, a.grid_k, a.grid_c)?;
    emit(a.out.as_deref(), &table.to_csv())?;
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let out = a.out.unwrap_or_else(|| a.runs.clone());
    let opts = ReportOptions { ks: (!a.k.is_empty()).then_some(a.k), svg: a.svg };
    for p in write_report(&a.runs, &out, &opts)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("EXPR_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("EXPR_LAB_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("EXPR_LAB_THREADS must be a positive integer, got '0'".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let seed = cli.seed;
    let result = match cli.verb {
        Verb::Gen(a) => gen(a),
        Verb::Compile(a) => compile(a),
        Verb::Verify(a) => verify(a, seed),
        Verb::Analyze(a) => analyze(a),
        Verb::Train(a) => train(a, seed),
        Verb::Eval(a) => eval(a, seed),
        Verb::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

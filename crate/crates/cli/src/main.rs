//! `bsvm`: train and run budgeted kernel SVMs from the command line, plus
//! lookup-grid utilities, solver comparison/benchmark harnesses, and a
//! synthetic data generator. Every JSON report embeds the flags and seed
//! that produced it.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use bsvm_core::{
    evaluate, generate_synthetic, load_libsvm, run_bench, run_compare, train_with_solver,
    BudgetModel, Hyperparams, LookupGrid, MergeSolver, SolverKind,
};

#[derive(Parser)]
#[command(
    name = "bsvm",
    version,
    about = "Budgeted kernel SVM trainer with merge-based budget maintenance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and report its stats as JSON.
    Train(TrainArgs),
    /// Score a dataset with a trained model.
    Predict(PredictArgs),
    /// Build or dump merge lookup grids.
    Grid(GridArgs),
    /// Replay one training run through two solvers and compare decisions.
    Compare(CompareArgs),
    /// Benchmark training sections and per-solve latency across solvers.
    Bench(BenchArgs),
    /// Generate a synthetic two-Gaussian dataset.
    Synth(SynthArgs),
}

/// Training hyperparameters shared by train, compare, and bench.
#[derive(Args, Serialize)]
struct HyperArgs {
    /// Regularization parameter C; the SGD rate uses lambda = 1 / (n * C).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// RBF kernel width gamma.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Support vector budget B.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Passes over the training data.
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Merge solver: gss, gss-precise, lookup-h, or lookup-wd.
    #[arg(long, default_value = "gss")]
    solver: String,
    /// Bracket tolerance for the gss solver (gss-precise ignores this).
    #[arg(long, default_value_t = 0.01)]
    gss_eps: f64,
    /// Bracket tolerance for gss-precise and for grid construction.
    #[arg(long, default_value_t = 1e-10)]
    precise_eps: f64,
    /// Nodes per axis for the lookup solvers.
    #[arg(long, default_value_t = 400)]
    grid_size: usize,
    /// Grid cache: loaded if the file exists, otherwise built and saved there.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Learn an unregularized bias term.
    #[arg(long)]
    bias: bool,
    /// Seed for shuffling (and for data generation in synth).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl HyperArgs {
    fn to_hyperparams(&self) -> Result<Hyperparams> {
        Ok(Hyperparams {
            c: self.c,
            gamma: self.gamma,
            budget: self.budget,
            epochs: self.epochs,
            solver_kind: self.solver.parse()?,
            gss_eps: self.gss_eps,
            precise_eps: self.precise_eps,
            grid_size: self.grid_size,
            use_bias: self.bias,
            seed: self.seed,
        })
    }

    /// Resolves the lookup grid honoring the cache file, or `None` when no
    /// requested solver interpolates. The second value is the build time in
    /// seconds when a grid was actually built rather than loaded.
    fn resolve_grid(
        &self,
        hp: &Hyperparams,
        needed: bool,
    ) -> Result<(Option<Arc<LookupGrid>>, Option<f64>)> {
        if !needed {
            return Ok((None, None));
        }
        if let Some(path) = &self.grid_file {
            if path.exists() {
                let grid = LookupGrid::load(path)?;
                if grid.size() != hp.grid_size {
                    bail!(
                        "grid file {} holds {} nodes per axis, but --grid-size is {}",
                        path.display(),
                        grid.size(),
                        hp.grid_size
                    );
                }
                return Ok((Some(Arc::new(grid)), None));
            }
        }
        let started = Instant::now();
        let grid = LookupGrid::build(hp.grid_size, hp.precise_eps);
        let built = started.elapsed().as_secs_f64();
        if let Some(path) = &self.grid_file {
            grid.save(path)?;
        }
        Ok((Some(Arc::new(grid)), Some(built)))
    }
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    train: PathBuf,
    /// Held-out data scored after training.
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: HyperArgs,
    /// Where to save the trained model.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the stats JSON (also printed to stdout).
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    /// Model file produced by train.
    #[arg(long)]
    model: PathBuf,
    /// Data to score, in LIBSVM format.
    #[arg(long)]
    data: PathBuf,
    /// Prediction lines go here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(subcommand)]
    action: GridAction,
}

#[derive(Subcommand, Serialize)]
enum GridAction {
    /// Precompute a grid and write it as a binary file.
    Build {
        /// Nodes per axis.
        #[arg(long, default_value_t = 400)]
        size: usize,
        /// Bracket tolerance used at every node.
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        /// Output path for the binary grid.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write every node as a CSV row `m,kappa,h,wd`.
    Dump {
        /// Nodes per axis.
        #[arg(long, default_value_t = 400)]
        size: usize,
        /// Bracket tolerance used at every node.
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        /// CSV goes here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Serialize)]
struct CompareArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: HyperArgs,
    /// Solver that drives training.
    #[arg(long)]
    solver_a: String,
    /// Solver replayed on the same candidate sets.
    #[arg(long)]
    solver_b: String,
    /// Include every per-event record in the report.
    #[arg(long)]
    events: bool,
    /// Report JSON goes here (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    /// Training data in LIBSVM format.
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    hyper: HyperArgs,
    /// Comma-separated solvers to benchmark.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "gss,gss-precise,lookup-h,lookup-wd"
    )]
    solvers: Vec<String>,
    /// Training runs averaged per solver.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Calls in the isolated per-solve microbenchmark.
    #[arg(long, default_value_t = 1_000_000)]
    microbench_solves: usize,
    /// Report JSON goes here (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Number of examples.
    #[arg(long)]
    n: usize,
    /// Ambient dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Distance between the class centers on coordinate 0.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path, LIBSVM format.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Grid(args) => cmd_grid(&args.action),
        Command::Compare(args) => cmd_compare(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

/// Writes `text` to `path` when given, and always echoes it to stdout.
fn emit(text: &str, path: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let hp = args.hyper.to_hyperparams()?;
    let data = load_libsvm(&args.train)?;
    let (grid, _) = args.hyper.resolve_grid(&hp, hp.solver_kind.needs_grid())?;
    let solver = MergeSolver::for_kind(hp.solver_kind, hp.gss_eps, hp.precise_eps, grid)?;
    let (model, stats) = train_with_solver(&data, &hp, &solver, &mut |_| {})?;
    let accuracy = match &args.test {
        Some(path) => Some(evaluate(&model, &load_libsvm(path)?)?),
        None => None,
    };
    if let Some(path) = &args.model_out {
        model.save(path)?;
    }
    let doc = json!({
        "command": "train",
        "flags": args,
        "train_examples": data.len(),
        "support_vectors": model.entries.len(),
        "accuracy": accuracy,
        "stats": stats,
    });
    emit(&serde_json::to_string_pretty(&doc)?, &args.stats_out)
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = BudgetModel::load(&args.model)?;
    let data = load_libsvm(&args.data)?;
    if data.is_empty() {
        bail!("{} holds no examples", args.data.display());
    }
    let mut lines = String::new();
    let mut correct = 0usize;
    for example in &data.examples {
        let value = model.decision_function(&example.features);
        let positive = value >= 0.0;
        if positive == (example.label > 0.0) {
            correct += 1;
        }
        lines.push_str(if positive { "+1 " } else { "-1 " });
        lines.push_str(&format!("{value}\n"));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &lines).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{lines}"),
    }
    println!("# accuracy {}", correct as f64 / data.len() as f64);
    Ok(())
}

fn cmd_grid(action: &GridAction) -> Result<()> {
    match action {
        GridAction::Build { size, eps, out } => {
            validate_grid_params(*size, *eps)?;
            let grid = LookupGrid::build(*size, *eps);
            grid.save(out)?;
            let doc = json!({
                "command": "grid build",
                "flags": action,
                "bytes": fs::metadata(out)?.len(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(())
        }
        GridAction::Dump { size, eps, out } => {
            validate_grid_params(*size, *eps)?;
            let grid = LookupGrid::build(*size, *eps);
            let mut csv = String::new();
            for i in 0..grid.size() {
                for j in 0..grid.size() {
                    let (h, wd) = grid.node(i, j);
                    let m = grid.node_coord(i);
                    let kappa = grid.node_coord(j);
                    csv.push_str(&format!("{m},{kappa},{h},{wd}\n"));
                }
            }
            match out {
                Some(path) => fs::write(path, &csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn validate_grid_params(size: usize, eps: f64) -> Result<()> {
    if size < 2 {
        bail!("--size must be at least 2, got {size}");
    }
    if !(eps > 0.0) || !eps.is_finite() {
        bail!("--eps must be a positive finite number, got {eps}");
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let mut hp = args.hyper.to_hyperparams()?;
    hp.solver_kind = args.solver_a.parse()?;
    let solver_b: SolverKind = args.solver_b.parse()?;
    let data = load_libsvm(&args.train)?;
    let needed = hp.solver_kind.needs_grid() || solver_b.needs_grid();
    let (grid, _) = args.hyper.resolve_grid(&hp, needed)?;
    let report = run_compare(&data, &hp, solver_b, args.events, grid)?;
    let doc = json!({
        "command": "compare",
        "flags": args,
        "train_examples": data.len(),
        "report": report,
    });
    emit(&serde_json::to_string_pretty(&doc)?, &args.out)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let hp = args.hyper.to_hyperparams()?;
    let mut kinds = Vec::with_capacity(args.solvers.len());
    for name in &args.solvers {
        kinds.push(name.parse::<SolverKind>()?);
    }
    if kinds.is_empty() {
        bail!("--solvers must name at least one solver");
    }
    let data = load_libsvm(&args.train)?;
    let needed = kinds.iter().any(|k| k.needs_grid());
    let (grid, grid_build_seconds) = args.hyper.resolve_grid(&hp, needed)?;
    let mut report = run_bench(&data, &hp, &kinds, args.repeats, args.microbench_solves, grid)?;
    report.grid_build_seconds = grid_build_seconds;
    let doc = json!({
        "command": "bench",
        "flags": args,
        "train_examples": data.len(),
        "report": report,
    });
    emit(&serde_json::to_string_pretty(&doc)?, &args.out)
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let data = generate_synthetic(args.n, args.dim, args.separation, args.noise, args.seed)?;
    data.save_libsvm(&args.out)?;
    let doc = json!({
        "command": "synth",
        "flags": args,
        "examples": data.len(),
        "dim": data.dim,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

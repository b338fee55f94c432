//! `nst`: generate synthetic DAGs, train and evaluate embeddings, inspect
//! posets and rerun the desk-scale experiments.

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nst_core::baselines::GeometryKind;
use nst_core::graph::SyntheticMetric;
use nst_core::training::{CausalityMode, TargetMode};
use serde::de::DeserializeOwned;

use failure::Failure;

#[derive(Parser)]
#[command(name = "nst", version, about = "Neural spacetime embeddings of weighted DAGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random DAG or a complete tree as edges.tsv, features.csv and manifest.json.
    Generate(GenerateArgs),
    /// Train an embedding; writes report.json, loss.csv, checkpoint.json and manifest.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a graph; writes report.json and manifest.json.
    Evaluate(EvaluateArgs),
    /// Print order and metric facts about a DAG.
    Inspect(InspectArgs),
    /// Random DAG, one synthetic metric, one embedding run.
    ReproTable1(ReproTable1Args),
    /// Complete tree embedded by several geometries under one budget.
    ReproTree(ReproTreeArgs),
}

/// Parses kebab-case names through the serde representation of `T`.
fn named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown value `{s}`"))
}

fn geometry(s: &str) -> Result<GeometryKind, String> {
    s.parse().map_err(|e: nst_core::baselines::BaselineError| e.to_string())
}

fn metric(s: &str) -> Result<SyntheticMetric, String> {
    s.parse().map_err(|e: nst_core::graph::GraphError| e.to_string())
}

#[derive(Args, Clone)]
struct GraphInput {
    /// Tab-separated `source target weight` lines.
    #[arg(long)]
    edges: PathBuf,
    /// One CSV row of node features per node; one-hot features if omitted.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct TrainFlags {
    /// JSON training configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    space_dim: Option<usize>,
    #[arg(long)]
    time_dim: Option<usize>,
    #[arg(long, value_parser = geometry)]
    geometry: Option<GeometryKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run on a single thread.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_parser = named::<CausalityMode>)]
    causality: Option<CausalityMode>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `edges` or `all-pairs`.
    #[arg(long, value_parser = named::<TargetMode>)]
    targets: Option<TargetMode>,
    /// Target pairs per optimizer step; full batch if omitted.
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 0.9)]
    edge_prob: f64,
    #[arg(long, value_parser = metric, default_value = "m1")]
    metric: SyntheticMetric,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Complete tree with unit weights instead of a random DAG.
    #[arg(long)]
    tree: bool,
    #[arg(long, default_value_t = 2)]
    branching: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = named::<TargetMode>, default_value = "edges")]
    targets: TargetMode,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    input: GraphInput,
}

#[derive(Args)]
struct ReproTable1Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 0.9)]
    edge_prob: f64,
    #[arg(long, value_parser = metric, default_value = "m1")]
    metric: SyntheticMetric,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct ReproTreeArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[command(flatten)]
    flags: TrainFlags,
}

fn configure_threads(deterministic: bool) -> Result<(), Failure> {
    let threads = match std::env::var("NST_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::Malformed(format!("NST_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let threads = if deterministic { Some(1) } else { threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Malformed(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let deterministic = match &cli.command {
        Command::Train(a) => a.flags.deterministic,
        Command::ReproTable1(a) => a.flags.deterministic,
        Command::ReproTree(a) => a.flags.deterministic,
        _ => false,
    };
    configure_threads(deterministic)?;
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Inspect(a) => commands::inspect(&a),
        Command::ReproTable1(a) => commands::repro_table1(&a),
        Command::ReproTree(a) => commands::repro_tree(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(failure::MALFORMED)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

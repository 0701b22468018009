//! `live`: generate graphs, train embeddings, build indexes and answer
//! subgraph queries from the command line.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use live_core::experiment::{
    report_to_string, run_experiment, DatasetSpec, ExperimentConfig, MetricToggles, ModelSource, WorkloadSpec,
};
use live_core::generate::{generate_query, generate_synthetic, nws_params_for_degree, DistributionKind, LabelDistribution};
use live_core::index::{build_index, IndexConfig, DEFAULT_FANOUT, DEFAULT_T_MAX};
use live_core::matcher::{match_query_with, oracle_match, PruneConfig, PruningStage};
use live_core::persist::{
    graph_set_to_string, load_graph, load_graph_set, load_index, load_model, save_index, save_model, write_matches,
};
use live_core::train::{train, AnnealCurve, TrainConfig};

#[derive(Parser)]
#[command(name = "live", version, about = "Exact subgraph matching with learned monotonic embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data graph, or a query set cut from a graph.
    Gen(GenArgs),
    /// Train a label-embedding model on a data graph.
    Train(TrainArgs),
    /// Build an index from a data graph and a model.
    Index(IndexArgs),
    /// Answer every query in a file against an index.
    Query(QueryArgs),
    /// Run a query workload end to end and write a CSV report.
    Bench(BenchArgs),
    /// Answer queries with the brute-force reference matcher.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Gaussian,
    Zipf,
}

impl From<Dist> for DistributionKind {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Uniform => DistributionKind::Uniform,
            Dist::Gaussian => DistributionKind::Gaussian,
            Dist::Zipf => DistributionKind::Zipf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    KeyLower,
    KeyUpper,
    Dominance,
    Hop,
    Degree,
}

impl From<Stage> for PruningStage {
    fn from(s: Stage) -> Self {
        match s {
            Stage::KeyLower => PruningStage::KeyLowerBound,
            Stage::KeyUpper => PruningStage::KeyUpperBound,
            Stage::Dominance => PruningStage::Dominance,
            Stage::Hop => PruningStage::HopSynopsis,
            Stage::Degree => PruningStage::DegreeSynopsis,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Number of data vertices.
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    /// Average degree; sets the lattice degree and shortcut probability.
    #[arg(long, default_value_t = 5.0)]
    avg_deg: f64,
    /// Override the ring-lattice degree (even).
    #[arg(long, requires = "p")]
    k: Option<usize>,
    /// Override the shortcut probability.
    #[arg(long, requires = "k")]
    p: Option<f64>,
    /// Label alphabet size.
    #[arg(long, default_value_t = 15)]
    labels: usize,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    dist: Dist,
    /// Cut queries out of this graph instead of generating a data graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Number of queries to generate (requires --graph).
    #[arg(long, requires = "graph", default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 8)]
    query_size: usize,
    #[arg(long, default_value_t = 3.0)]
    query_avg_deg: f64,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 100_000.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1_000)]
    epochs: usize,
    /// Vertex pairs sampled per epoch.
    #[arg(long, default_value_t = 4_096)]
    pairs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    tau_start: f64,
    #[arg(long, default_value_t = 0.05)]
    tau_end: f64,
    /// Anneal the temperature linearly instead of geometrically.
    #[arg(long)]
    linear_anneal: bool,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.lr,
            pairs_per_batch: self.pairs,
            epochs: self.epochs,
            tau_start: self.tau_start,
            tau_end: self.tau_end,
            anneal: if self.linear_anneal {
                AnnealCurve::Linear
            } else {
                AnnealCurve::Geometric
            },
            seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct IndexFlags {
    /// Hop levels kept per vertex.
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    t_max: usize,
    #[arg(long, default_value_t = DEFAULT_FANOUT)]
    fanout: usize,
}

impl IndexFlags {
    fn config(&self) -> IndexConfig {
        IndexConfig {
            t_max: self.t_max,
            fanout: self.fanout,
        }
    }
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    index: IndexFlags,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PruneFlags {
    /// Pruning stages to switch off (repeatable).
    #[arg(long, value_enum)]
    disable: Vec<Stage>,
}

impl PruneFlags {
    fn config(&self) -> PruneConfig {
        let mut c = PruneConfig::default();
        for &s in &self.disable {
            let off = PruneConfig::without(s.into());
            c.key_lower &= off.key_lower;
            c.key_upper &= off.key_upper;
            c.dominance &= off.dominance;
            c.hop &= off.hop;
            c.degree &= off.degree;
        }
        c
    }
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Index file; required unless --rebuild is given.
    #[arg(long, required_unless_present = "rebuild")]
    index: Option<PathBuf>,
    /// Build the index from graph and model instead of loading it.
    #[arg(long)]
    rebuild: bool,
    #[command(flatten)]
    index_flags: IndexFlags,
    /// File with one or more query graphs.
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    prune: PruneFlags,
    /// Write 0 for all times in summary lines.
    #[arg(long)]
    no_timings: bool,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Data graph file; a synthetic graph is generated when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 5.0)]
    avg_deg: f64,
    #[arg(long, default_value_t = 15)]
    labels: usize,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    dist: Dist,
    /// Model file; trained from the graph when omitted.
    #[arg(long, conflicts_with = "untrained")]
    model: Option<PathBuf>,
    /// Use seeded, untrained embeddings.
    #[arg(long)]
    untrained: bool,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    index: IndexFlags,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 8)]
    query_size: usize,
    #[arg(long, default_value_t = 3.0)]
    query_avg_deg: f64,
    #[command(flatten)]
    prune: PruneFlags,
    /// Worker threads; LIVE_THREADS overrides this.
    #[arg(long)]
    workers: Option<usize>,
    /// Write 0 for all time columns.
    #[arg(long)]
    no_timings: bool,
    #[arg(long)]
    seed: u64,
    /// Report file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    no_timings: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen(args: GenArgs) -> Result<()> {
    let text = if let Some(path) = &args.graph {
        let g = load_graph(path).with_context(|| format!("cannot read {}", path.display()))?;
        let queries = (0..args.queries)
            .map(|i| {
                let seed = WorkloadSpec {
                    count: args.queries,
                    query_vertices: args.query_size,
                    query_avg_degree: args.query_avg_deg,
                    seed: args.seed,
                }
                .query_seed(i);
                generate_query(&g, args.query_size, args.query_avg_deg, seed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        graph_set_to_string(&queries)
    } else {
        let (k, p) = match (args.k, args.p) {
            (Some(k), Some(p)) => (k, p),
            _ => nws_params_for_degree(args.avg_deg),
        };
        let dist = LabelDistribution::new(args.dist.into(), args.labels);
        generate_synthetic(args.n, k, p, &dist, args.seed)?.to_text()
    };
    fs::write(&args.output, text).with_context(|| format!("cannot write {}", args.output.display()))?;
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let g = load_graph(&args.graph).with_context(|| format!("cannot read {}", args.graph.display()))?;
    let table = train(&g, &args.flags.config(args.seed))?;
    save_model(&table, &args.output)?;
    Ok(())
}

fn index_cmd(args: IndexArgs) -> Result<()> {
    let g = load_graph(&args.graph).with_context(|| format!("cannot read {}", args.graph.display()))?;
    let table = load_model(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?;
    let index = build_index(&g, &table, args.index.config())?;
    save_index(&index, &args.output)?;
    Ok(())
}

fn query_cmd(args: QueryArgs) -> Result<()> {
    let g = load_graph(&args.graph).with_context(|| format!("cannot read {}", args.graph.display()))?;
    let table = load_model(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?;
    let index = match (&args.index, args.rebuild) {
        (_, true) => build_index(&g, &table, args.index_flags.config())?,
        (Some(path), false) => load_index(path).with_context(|| format!("cannot load index {}", path.display()))?,
        (None, false) => bail!("--index is required without --rebuild"),
    };
    let queries = load_graph_set(&args.query).with_context(|| format!("cannot read {}", args.query.display()))?;
    let prune = args.prune.config();
    let mut out = open_output(args.output.as_deref())?;
    for q in &queries {
        let m = match_query_with(&index, &g, &table, q, &prune)?;
        write_matches(&m, !args.no_timings, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<()> {
    let dataset = match &args.graph {
        Some(path) => DatasetSpec::File(path.clone()),
        None => DatasetSpec::Synthetic {
            vertices: args.n,
            avg_degree: args.avg_deg,
            labels: args.labels,
            distribution: args.dist.into(),
            seed: args.seed,
        },
    };
    let model = match (&args.model, args.untrained) {
        (Some(path), _) => ModelSource::File(path.clone()),
        (None, true) => ModelSource::Random {
            dim: args.train.dim,
            seed: args.seed,
        },
        (None, false) => ModelSource::Train(args.train.config(args.seed)),
    };
    let metrics = MetricToggles {
        timings: !args.no_timings,
    };
    let config = ExperimentConfig {
        dataset,
        workload: WorkloadSpec {
            count: args.queries,
            query_vertices: args.query_size,
            query_avg_degree: args.query_avg_deg,
            seed: args.seed,
        },
        model,
        index: args.index.config(),
        prune: args.prune.config(),
        workers: args.workers,
        metrics,
    };
    let outcome = run_experiment(&config)?;
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(report_to_string(&outcome.report, metrics).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn oracle_cmd(args: OracleArgs) -> Result<()> {
    let g = load_graph(&args.graph).with_context(|| format!("cannot read {}", args.graph.display()))?;
    let queries = load_graph_set(&args.query).with_context(|| format!("cannot read {}", args.query.display()))?;
    let mut out = open_output(args.output.as_deref())?;
    for q in &queries {
        write_matches(&oracle_match(&g, q), !args.no_timings, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Index(a) => index_cmd(a),
        Command::Query(a) => query_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

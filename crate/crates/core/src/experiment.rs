//! Experiment driver: dataset and workload construction, concurrent query
//! execution with deterministic result order, and CSV reporting.

use std::io;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::embedding::LabelEmbeddingTable;
use crate::generate::{generate_query, generate_synthetic, nws_params_for_degree, DistributionKind, LabelDistribution};
use crate::graph::Graph;
use crate::index::{build_index, ILabelIndex, IndexConfig, DEFAULT_T_MAX, DEFAULT_FANOUT};
use crate::matcher::{match_query_with, MatchSet, PruneConfig, PruningReport, StageTimings};
use crate::persist::{index_to_bytes, load_graph, load_model};
use crate::train::{train, TrainConfig};
use crate::Error;

/// Identifier written in the first column of every report row.
pub const REPORT_SCHEMA: &str = "live-bench-v1";
/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "LIVE_THREADS";

pub const DEFAULT_VERTICES: usize = 50_000;
pub const DEFAULT_AVG_DEGREE: f64 = 5.0;
pub const DEFAULT_LABELS: usize = 15;
pub const DEFAULT_QUERY_COUNT: usize = 100;
pub const DEFAULT_QUERY_VERTICES: usize = 8;
pub const DEFAULT_QUERY_AVG_DEGREE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    File(PathBuf),
    Synthetic {
        vertices: usize,
        avg_degree: f64,
        labels: usize,
        distribution: DistributionKind,
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn synthetic(vertices: usize, avg_degree: f64, labels: usize, seed: u64) -> Self {
        Self::Synthetic {
            vertices,
            avg_degree,
            labels,
            distribution: DistributionKind::Uniform,
            seed,
        }
    }

    pub fn load(&self) -> Result<Graph, Error> {
        match self {
            Self::File(path) => Ok(load_graph(path)?),
            Self::Synthetic {
                vertices,
                avg_degree,
                labels,
                distribution,
                seed,
            } => {
                let (k, p) = nws_params_for_degree(*avg_degree);
                let dist = LabelDistribution::new(*distribution, *labels);
                Ok(generate_synthetic(*vertices, k, p, &dist, *seed)?)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub count: usize,
    pub query_vertices: usize,
    pub query_avg_degree: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            count: DEFAULT_QUERY_COUNT,
            query_vertices: DEFAULT_QUERY_VERTICES,
            query_avg_degree: DEFAULT_QUERY_AVG_DEGREE,
            seed,
        }
    }

    /// Seed of the `i`-th query.
    pub fn query_seed(&self, i: usize) -> u64 {
        self.seed
            .wrapping_mul(0x2545_f491_4f6c_dd1d)
            .wrapping_add(i as u64)
    }
}

/// Where the embedding table comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Train(TrainConfig),
    /// Untrained: seeded uniform initialization, L1-normalized.
    Random { dim: usize, seed: u64 },
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricToggles {
    /// When off, every time column is written as 0 so reports are
    /// byte-comparable across runs.
    pub timings: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self { timings: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub workload: WorkloadSpec,
    pub model: ModelSource,
    pub index: IndexConfig,
    pub prune: PruneConfig,
    /// `None` picks the available parallelism; `LIVE_THREADS` overrides both.
    pub workers: Option<usize>,
    pub metrics: MetricToggles,
}

impl ExperimentConfig {
    /// The default synthetic configuration: 50K vertices, average degree 5,
    /// 15 uniform labels, 100 queries of 8 vertices with average degree 3,
    /// d = 2, alpha / beta = 100K, t = 2.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            dataset: DatasetSpec::synthetic(DEFAULT_VERTICES, DEFAULT_AVG_DEGREE, DEFAULT_LABELS, seed),
            workload: WorkloadSpec::with_seed(seed),
            model: ModelSource::Train(TrainConfig::with_seed(seed)),
            index: IndexConfig {
                t_max: DEFAULT_T_MAX,
                fanout: DEFAULT_FANOUT,
            },
            prune: PruneConfig::default(),
            workers: None,
            metrics: MetricToggles::default(),
        }
    }
}

/// Worker count after applying the `LIVE_THREADS` override.
pub fn worker_count(requested: Option<usize>) -> usize {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    from_env
        .or(requested.filter(|&n| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn generate_workload(g: &Graph, spec: &WorkloadSpec) -> Result<Vec<Graph>, Error> {
    (0..spec.count)
        .map(|i| {
            generate_query(g, spec.query_vertices, spec.query_avg_degree, spec.query_seed(i))
                .map_err(Error::from)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryResult {
    pub query: usize,
    pub vertices: usize,
    pub edges: usize,
    pub matches: MatchSet,
}

impl QueryResult {
    fn pruning(&self) -> &PruningReport {
        self.matches
            .pruning
            .as_ref()
            .expect("indexed matching always reports pruning")
    }
}

/// Runs every query on `workers` threads. Each query is processed
/// independently; results come back ordered by query index.
pub fn run_workload(
    index: &ILabelIndex,
    g: &Graph,
    table: &LabelEmbeddingTable,
    queries: &[Graph],
    prune: &PruneConfig,
    workers: usize,
) -> Result<Vec<QueryResult>, Error> {
    let run = |i: usize| -> Result<QueryResult, Error> {
        let q = &queries[i];
        Ok(QueryResult {
            query: i,
            vertices: q.vertex_count(),
            edges: q.edge_count(),
            matches: match_query_with(index, g, table, q, prune)?,
        })
    };
    let workers = workers.clamp(1, queries.len().max(1));
    if workers == 1 {
        return (0..queries.len()).map(run).collect();
    }
    let mut slots: Vec<Option<Result<QueryResult, Error>>> = (0..queries.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run = &run;
                s.spawn(move || {
                    (w..queries.len())
                        .step_by(workers)
                        .map(|i| (i, run(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("query worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every query ran")).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OfflineCosts {
    pub train: Duration,
    pub build: Duration,
    pub index_bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub offline: OfflineCosts,
    pub queries: Vec<QueryResult>,
}

/// Everything an experiment produced, for persistence or inspection.
pub struct ExperimentOutcome {
    pub graph: Graph,
    pub table: LabelEmbeddingTable,
    pub index: ILabelIndex,
    pub queries: Vec<Graph>,
    pub report: BenchReport,
}

pub fn load_or_train_model(source: &ModelSource, g: &Graph) -> Result<LabelEmbeddingTable, Error> {
    Ok(match source {
        ModelSource::Train(cfg) => train(g, cfg)?,
        ModelSource::Random { dim, seed } => {
            let cfg = TrainConfig {
                dim: *dim,
                seed: *seed,
                ..TrainConfig::default()
            };
            let mut t = crate::train::initial_table(g, &cfg)?;
            t.set_l1_normalized(true);
            t
        }
        ModelSource::File(path) => load_model(path)?,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, Error> {
    let graph = config.dataset.load()?;
    let start = Instant::now();
    let table = load_or_train_model(&config.model, &graph)?;
    let train_time = start.elapsed();
    let start = Instant::now();
    let index = build_index(&graph, &table, config.index)?;
    let build_time = start.elapsed();
    let index_bytes = index_to_bytes(&index).len();
    let queries = generate_workload(&graph, &config.workload)?;
    let results = run_workload(
        &index,
        &graph,
        &table,
        &queries,
        &config.prune,
        worker_count(config.workers),
    )?;
    Ok(ExperimentOutcome {
        graph,
        table,
        index,
        queries,
        report: BenchReport {
            offline: OfflineCosts {
                train: train_time,
                build: build_time,
                index_bytes,
            },
            queries: results,
        },
    })
}

pub const REPORT_COLUMNS: [&str; 22] = [
    "schema",
    "row",
    "query",
    "query_vertices",
    "query_edges",
    "matches",
    "filter_us",
    "order_us",
    "refine_us",
    "total_us",
    "candidates",
    "pruning_power",
    "scanned",
    "key_range_pruned",
    "label_pruned",
    "dominance_pruned",
    "hop_pruned",
    "degree_pruned",
    "train_us",
    "build_us",
    "index_bytes",
    "data_vertices",
];

/// CSV with one row per query followed by an `aggregate` row holding means
/// over the queries and the offline costs. Times are microseconds, sizes
/// bytes. An empty workload produces only the header.
pub fn write_report<W: io::Write>(report: &BenchReport, metrics: MetricToggles, w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS)?;
    if report.queries.is_empty() {
        out.flush()?;
        return Ok(());
    }
    let us = |d: Duration| if metrics.timings { d.as_micros() as f64 } else { 0.0 };
    let mut sums = [0.0f64; 15];
    for r in &report.queries {
        let p = r.pruning();
        let t: &StageTimings = &r.matches.timings;
        let c = &p.counters;
        let values = [
            r.vertices as f64,
            r.edges as f64,
            r.matches.count() as f64,
            us(t.filter),
            us(t.order),
            us(t.refine),
            us(t.total()),
            p.candidate_sizes.iter().sum::<usize>() as f64,
            p.power,
            c.scanned as f64,
            p.key_range_eliminated() as f64,
            c.label as f64,
            c.dominance as f64,
            c.hop as f64,
            c.degree as f64,
        ];
        for (s, v) in sums.iter_mut().zip(values) {
            *s += v;
        }
        let mut row = vec![REPORT_SCHEMA.to_string(), "query".into(), r.query.to_string()];
        row.extend(values.iter().map(|v| format!("{v}")));
        row.extend([String::new(), String::new(), String::new()]);
        row.push(p.data_vertices.to_string());
        out.write_record(&row)?;
    }
    let n = report.queries.len() as f64;
    let mut row = vec![REPORT_SCHEMA.to_string(), "aggregate".into(), report.queries.len().to_string()];
    row.extend(sums.iter().map(|s| format!("{}", s / n)));
    row.push(format!("{}", us(report.offline.train)));
    row.push(format!("{}", us(report.offline.build)));
    row.push(report.offline.index_bytes.to_string());
    row.push(report.queries[0].pruning().data_vertices.to_string());
    out.write_record(&row)?;
    out.flush()?;
    Ok(())
}

pub fn report_to_string(report: &BenchReport, metrics: MetricToggles) -> String {
    let mut buf = Vec::new();
    write_report(report, metrics, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::with_seed(seed);
        c.dataset = DatasetSpec::synthetic(600, 5.0, 6, seed);
        c.workload.count = 12;
        c.workload.query_vertices = 6;
        c.model = ModelSource::Random { dim: 2, seed };
        c.metrics.timings = false;
        c
    }

    #[test]
    fn defaults_follow_the_standard_setting() {
        let c = ExperimentConfig::with_seed(1);
        assert_eq!(c.dataset, DatasetSpec::synthetic(50_000, 5.0, 15, 1));
        assert_eq!(c.workload.count, 100);
        assert_eq!(c.workload.query_vertices, 8);
        assert_eq!(c.workload.query_avg_degree, 3.0);
        assert_eq!(c.index, IndexConfig { t_max: 2, fanout: 64 });
        let ModelSource::Train(t) = &c.model else { panic!() };
        assert_eq!((t.dim, t.alpha / t.beta), (2, 1e5));
    }

    #[test]
    fn empty_workload_is_header_only() {
        let report = BenchReport {
            offline: OfflineCosts::default(),
            queries: vec![],
        };
        let text = report_to_string(&report, MetricToggles::default());
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), REPORT_COLUMNS.join(","));
    }

    #[test]
    fn report_rows_and_pruning_column() {
        let out = run_experiment(&small_config(5)).unwrap();
        let text = report_to_string(&out.report, MetricToggles { timings: false });
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 13);
        let pp = REPORT_COLUMNS.iter().position(|&c| c == "pruning_power").unwrap();
        for (r, q) in rows.iter().zip(&out.report.queries) {
            let v: f64 = r[pp].parse().unwrap();
            assert_eq!(v, q.matches.pruning.as_ref().unwrap().power);
            assert_eq!(&r[6], "0");
        }
        assert_eq!(&rows[12][1], "aggregate");
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = small_config(8);
        c.workers = Some(1);
        let a = run_experiment(&c).unwrap();
        c.workers = Some(4);
        let b = run_experiment(&c).unwrap();
        let strip = |o: &ExperimentOutcome| report_to_string(&o.report, MetricToggles { timings: false });
        assert_eq!(strip(&a), strip(&b));
        for (x, y) in a.report.queries.iter().zip(&b.report.queries) {
            assert_eq!(x.matches.mappings, y.matches.mappings);
        }
    }
}

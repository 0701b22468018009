//! Online query processing: candidate retrieval through the index with the
//! pruning cascade, greedy matching order, and backtracking refinement. Also
//! hosts the brute-force reference matcher.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingSet, LabelEmbeddingTable};
use crate::graph::{Graph, LabelId, VertexId};
use crate::index::synopsis::{box_within, point_within};
use crate::index::{compute_key, effective_table, hop_synopsis, HopSynopsis, ILabelIndex, IndexError};

/// Slack used by every online comparison.
pub const DOMINANCE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("index covers {index} vertices but the data graph has {graph}")]
    GraphMismatch { index: usize, graph: usize },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// The pruning stages applied during candidate retrieval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PruningStage {
    KeyLowerBound,
    KeyUpperBound,
    Dominance,
    HopSynopsis,
    DegreeSynopsis,
}

impl PruningStage {
    pub const ALL: [PruningStage; 5] = [
        Self::KeyLowerBound,
        Self::KeyUpperBound,
        Self::Dominance,
        Self::HopSynopsis,
        Self::DegreeSynopsis,
    ];
}

/// Which pruning stages are active. Label-cluster membership is always checked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneConfig {
    pub key_lower: bool,
    pub key_upper: bool,
    pub dominance: bool,
    pub hop: bool,
    pub degree: bool,
    pub epsilon: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            key_lower: true,
            key_upper: true,
            dominance: true,
            hop: true,
            degree: true,
            epsilon: DOMINANCE_EPSILON,
        }
    }
}

impl PruneConfig {
    pub fn without(stage: PruningStage) -> Self {
        let mut c = Self::default();
        match stage {
            PruningStage::KeyLowerBound => c.key_lower = false,
            PruningStage::KeyUpperBound => c.key_upper = false,
            PruningStage::Dominance => c.dominance = false,
            PruningStage::HopSynopsis => c.hop = false,
            PruningStage::DegreeSynopsis => c.degree = false,
        }
        c
    }
}

/// Elimination counts of one retrieval (or summed over a query).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PruneCounters {
    /// Index entries visited inside the key range.
    pub scanned: u64,
    /// Visited entries from another label cluster.
    pub label: u64,
    pub dominance: u64,
    pub hop: u64,
    pub degree: u64,
    pub accepted: u64,
}

impl PruneCounters {
    fn add(&mut self, o: &PruneCounters) {
        self.scanned += o.scanned;
        self.label += o.label;
        self.dominance += o.dominance;
        self.hop += o.hop;
        self.degree += o.degree;
        self.accepted += o.accepted;
    }
}

/// Query-side embeddings and synopses of one query vertex.
#[derive(Clone, Debug)]
pub struct QueryVertexProfile {
    pub label: LabelId,
    pub degree: usize,
    pub mve: Vec<f64>,
    pub vse: Vec<f64>,
    pub key: f64,
    pub hop: HopSynopsis,
}

/// Embeddings of a whole query under the index's weights. `None` entries
/// mark query vertices whose label the model does not know; such a query
/// cannot match.
#[derive(Clone, Debug)]
pub struct QueryProfile {
    vertices: Option<Vec<QueryVertexProfile>>,
}

impl QueryProfile {
    pub fn new(index: &ILabelIndex, table: &LabelEmbeddingTable, q: &Graph) -> Result<Self, MatchError> {
        let table = effective_table(table, index)?;
        if q.labels().iter().any(|&l| l as usize >= table.label_count()) {
            return Ok(Self { vertices: None });
        }
        let set = EmbeddingSet::compute(q, &table)?;
        let vertices = q
            .vertices()
            .map(|v| QueryVertexProfile {
                label: q.label(v),
                degree: q.degree(v),
                mve: set.mve(v).to_vec(),
                vse: set.vse(v).to_vec(),
                key: compute_key(set.vle(v), set.vse(v), table.alpha(), table.beta()),
                hop: hop_synopsis(q, &table, v, index.t_max()),
            })
            .collect();
        Ok(Self {
            vertices: Some(vertices),
        })
    }

    pub fn vertex(&self, qi: VertexId) -> Option<&QueryVertexProfile> {
        self.vertices.as_ref().map(|v| &v[qi as usize])
    }
}

/// Lower end of the scan range for a query key: the key minus a relative
/// slack, never below the base key of the label's cluster.
pub fn scan_lower_bound(query_key: f64, cluster_base: f64, epsilon: f64) -> f64 {
    (query_key - epsilon * (1.0 + query_key.abs())).max(cluster_base)
}

/// Dominance with slack relative to the magnitude of the dominating side.
#[inline]
pub fn dominated_relative(query: &[f64], data: &[f64], epsilon: f64) -> bool {
    query
        .iter()
        .zip(data)
        .all(|(q, v)| *q <= *v + epsilon * (1.0 + v.abs()))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateList {
    /// Surviving data vertices in key order.
    pub vertices: Vec<VertexId>,
    pub counters: PruneCounters,
}

/// Candidates for query vertex `qi`.
pub fn retrieve_candidates(
    index: &ILabelIndex,
    g: &Graph,
    table: &LabelEmbeddingTable,
    q: &Graph,
    qi: VertexId,
    config: &PruneConfig,
) -> Result<CandidateList, MatchError> {
    check_index(index, g)?;
    let profile = QueryProfile::new(index, table, q)?;
    Ok(retrieve_with_profile(index, g, &profile, qi, config))
}

fn check_index(index: &ILabelIndex, g: &Graph) -> Result<(), MatchError> {
    if index.vertex_count() != g.vertex_count() {
        return Err(MatchError::GraphMismatch {
            index: index.vertex_count(),
            graph: g.vertex_count(),
        });
    }
    Ok(())
}

fn retrieve_with_profile(
    index: &ILabelIndex,
    g: &Graph,
    profile: &QueryProfile,
    qi: VertexId,
    config: &PruneConfig,
) -> CandidateList {
    let mut out = CandidateList::default();
    let Some(p) = profile.vertex(qi) else {
        return out;
    };
    let Some((base, next)) = index.key_map().interval(p.label) else {
        return out;
    };
    let eps = config.epsilon;
    let lo = if config.key_lower {
        scan_lower_bound(p.key, base, eps)
    } else {
        f64::NEG_INFINITY
    };
    let hi = if config.key_upper { next } else { f64::INFINITY };
    let c = &mut out.counters;
    for entry in index.range_scan(lo, hi) {
        let v = entry.vertex;
        c.scanned += 1;
        if g.label(v) != p.label {
            c.label += 1;
            continue;
        }
        if config.dominance && !dominated_relative(&p.mve, index.mve(v), eps) {
            c.dominance += 1;
            continue;
        }
        // coarse to fine: the widest ball first
        if config.hop
            && !(2..=index.t_max()).rev().all(|t| {
                let (lo, hi) = index.hop_bounds(v, t);
                let m = p.hop.level(t);
                box_within(&m.lower, &m.upper, lo, hi, eps)
            })
        {
            c.hop += 1;
            continue;
        }
        if config.degree && p.degree > 0 {
            let inside = match index.degree_bounds(v, p.degree) {
                Some((lo, hi)) => point_within(&p.vse, lo, hi, eps),
                None => false,
            };
            if !inside {
                c.degree += 1;
                continue;
            }
        }
        c.accepted += 1;
        out.vertices.push(v);
    }
    out
}

/// Greedy order: start from the smallest candidate set, then repeatedly take
/// the unordered vertex adjacent to the prefix with the smallest set. Ties go
/// to the lower id; a new component restarts from the global minimum.
pub fn matching_order(q: &Graph, sizes: &[usize]) -> Vec<VertexId> {
    let n = q.vertex_count();
    assert_eq!(sizes.len(), n, "one candidate size per query vertex");
    let mut chosen = vec![false; n];
    let mut frontier = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let pick_from = |mask: &dyn Fn(usize) -> bool| {
            (0..n)
                .filter(|&u| !chosen[u] && mask(u))
                .min_by_key(|&u| (sizes[u], u))
        };
        let next = pick_from(&|u| frontier[u]).or_else(|| pick_from(&|_| true)).unwrap();
        chosen[next] = true;
        order.push(next as VertexId);
        for &w in q.neighbors(next as VertexId) {
            frontier[w as usize] = true;
        }
    }
    order
}

/// Per-stage wall-clock times of one query.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub filter: Duration,
    pub order: Duration,
    pub refine: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.filter + self.order + self.refine
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruningReport {
    pub data_vertices: usize,
    pub candidate_sizes: Vec<usize>,
    pub counters: PruneCounters,
    pub power: f64,
}

impl PruningReport {
    /// Entries never visited because the key range excluded them, summed over
    /// the query's vertices.
    pub fn key_range_eliminated(&self) -> u64 {
        (self.data_vertices * self.candidate_sizes.len()) as u64 - self.counters.scanned
    }
}

/// Candidate sets, matching order and pruning statistics of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePlan {
    pub candidates: Vec<Vec<VertexId>>,
    pub order: Vec<VertexId>,
    pub counters: Vec<PruneCounters>,
}

impl CandidatePlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.candidates.iter().map(Vec::len).collect()
    }
}

/// All enumerated matches of one query. Each mapping is indexed by query
/// vertex id and holds the matched data vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchSet {
    pub mappings: Vec<Vec<VertexId>>,
    pub timings: StageTimings,
    pub pruning: Option<PruningReport>,
}

impl MatchSet {
    pub fn count(&self) -> usize {
        self.mappings.len()
    }

    /// Mappings in lexicographic order, for set comparisons.
    pub fn sorted_mappings(&self) -> Vec<Vec<VertexId>> {
        let mut m = self.mappings.clone();
        m.sort_unstable();
        m
    }
}

/// `100 * (1 - sum |cand_i| / (|V(q)| * |V(G)|))`.
pub fn pruning_power(data_vertices: usize, candidate_sizes: &[usize]) -> f64 {
    let denom = (data_vertices * candidate_sizes.len()) as f64;
    if denom == 0.0 {
        return 100.0;
    }
    let total: usize = candidate_sizes.iter().sum();
    100.0 * (1.0 - total as f64 / denom)
}

pub fn plan_query(
    index: &ILabelIndex,
    g: &Graph,
    table: &LabelEmbeddingTable,
    q: &Graph,
    config: &PruneConfig,
) -> Result<CandidatePlan, MatchError> {
    check_index(index, g)?;
    let profile = QueryProfile::new(index, table, q)?;
    let lists: Vec<CandidateList> = q
        .vertices()
        .map(|qi| retrieve_with_profile(index, g, &profile, qi, config))
        .collect();
    let sizes: Vec<usize> = lists.iter().map(|l| l.vertices.len()).collect();
    let order = matching_order(q, &sizes);
    let (candidates, counters) = lists.into_iter().map(|l| (l.vertices, l.counters)).unzip();
    Ok(CandidatePlan {
        candidates,
        order,
        counters,
    })
}

pub fn match_query(
    index: &ILabelIndex,
    g: &Graph,
    table: &LabelEmbeddingTable,
    q: &Graph,
) -> Result<MatchSet, MatchError> {
    match_query_with(index, g, table, q, &PruneConfig::default())
}

pub fn match_query_with(
    index: &ILabelIndex,
    g: &Graph,
    table: &LabelEmbeddingTable,
    q: &Graph,
    config: &PruneConfig,
) -> Result<MatchSet, MatchError> {
    check_index(index, g)?;
    let start = Instant::now();
    let profile = QueryProfile::new(index, table, q)?;
    let lists: Vec<CandidateList> = q
        .vertices()
        .map(|qi| retrieve_with_profile(index, g, &profile, qi, config))
        .collect();
    let filtered = Instant::now();
    let sizes: Vec<usize> = lists.iter().map(|l| l.vertices.len()).collect();
    let order = matching_order(q, &sizes);
    let ordered = Instant::now();
    let mut counters = PruneCounters::default();
    for l in &lists {
        counters.add(&l.counters);
    }
    let candidates: Vec<Vec<VertexId>> = lists.into_iter().map(|l| l.vertices).collect();
    let mappings = refine_mappings(g, q, &order, &candidates);
    let done = Instant::now();
    Ok(MatchSet {
        mappings,
        timings: StageTimings {
            filter: filtered - start,
            order: ordered - filtered,
            refine: done - ordered,
        },
        pruning: Some(PruningReport {
            data_vertices: g.vertex_count(),
            power: pruning_power(g.vertex_count(), &sizes),
            candidate_sizes: sizes,
            counters,
        }),
    })
}

/// Backtracking over `order`; see [`refine_mappings`].
pub fn refine(g: &Graph, q: &Graph, order: &[VertexId], candidates: &[Vec<VertexId>]) -> MatchSet {
    let start = Instant::now();
    let mappings = refine_mappings(g, q, order, candidates);
    MatchSet {
        mappings,
        timings: StageTimings {
            refine: start.elapsed(),
            ..Default::default()
        },
        pruning: None,
    }
}

/// Depth-first extension along `order`. A data vertex is accepted for a
/// query vertex if it is a candidate with the same label, is not used yet,
/// and is adjacent to the images of all earlier-ordered query neighbors.
/// Once some neighbor is mapped, candidates are drawn from the adjacency of
/// the lowest-degree such image rather than the whole candidate list.
pub fn refine_mappings(
    g: &Graph,
    q: &Graph,
    order: &[VertexId],
    candidates: &[Vec<VertexId>],
) -> Vec<Vec<VertexId>> {
    let n = q.vertex_count();
    assert_eq!(order.len(), n, "order must cover every query vertex");
    assert_eq!(candidates.len(), n, "one candidate list per query vertex");
    if n == 0 || candidates.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let mut position = vec![usize::MAX; n];
    for (i, &u) in order.iter().enumerate() {
        position[u as usize] = i;
    }
    let backward: Vec<Vec<VertexId>> = order
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            q.neighbors(u)
                .iter()
                .copied()
                .filter(|&w| position[w as usize] < i)
                .collect()
        })
        .collect();
    let sorted: Vec<Vec<VertexId>> = candidates
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    let mut search = Backtrack {
        g,
        q,
        order,
        backward: &backward,
        candidates: &sorted,
        mapping: vec![VertexId::MAX; n],
        used: Vec::with_capacity(n),
        out: Vec::new(),
    };
    search.extend(0);
    search.out
}

struct Backtrack<'a> {
    g: &'a Graph,
    q: &'a Graph,
    order: &'a [VertexId],
    backward: &'a [Vec<VertexId>],
    candidates: &'a [Vec<VertexId>],
    mapping: Vec<VertexId>,
    used: Vec<VertexId>,
    out: Vec<Vec<VertexId>>,
}

impl Backtrack<'_> {
    fn extend(&mut self, depth: usize) {
        if depth == self.order.len() {
            self.out.push(self.mapping.clone());
            return;
        }
        let u = self.order[depth];
        let cands = &self.candidates[u as usize];
        let back = &self.backward[depth];
        let label = self.q.label(u);
        if back.is_empty() {
            for &v in cands {
                if self.g.label(v) == label && !self.used.contains(&v) {
                    self.descend(depth, u, v);
                }
            }
            return;
        }
        let pivot = back
            .iter()
            .map(|&w| self.mapping[w as usize])
            .min_by_key(|&img| (self.g.degree(img), img))
            .unwrap();
        for &v in self.g.neighbors(pivot) {
            if self.g.label(v) != label
                || cands.binary_search(&v).is_err()
                || self.used.contains(&v)
            {
                continue;
            }
            if back.iter().all(|&w| self.g.has_edge(self.mapping[w as usize], v)) {
                self.descend(depth, u, v);
            }
        }
    }

    fn descend(&mut self, depth: usize, u: VertexId, v: VertexId) {
        self.mapping[u as usize] = v;
        self.used.push(v);
        self.extend(depth + 1);
        self.used.pop();
        self.mapping[u as usize] = VertexId::MAX;
    }
}

/// Brute-force reference: label- and edge-consistency backtracking with no
/// embeddings, index or synopses. Meant for desk-scale graphs.
pub fn oracle_match(g: &Graph, q: &Graph) -> MatchSet {
    let start = Instant::now();
    let n = q.vertex_count();
    let mut by_label: Vec<Vec<VertexId>> = vec![Vec::new(); g.label_alphabet_size()];
    for v in g.vertices() {
        by_label[g.label(v) as usize].push(v);
    }
    // BFS order from the lowest unvisited id keeps every vertex after one of
    // its neighbors whenever the query is connected.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in q.vertices() {
        if seen[root as usize] {
            continue;
        }
        seen[root as usize] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &w in q.neighbors(u) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut mapping = vec![VertexId::MAX; n];
    let mut out = Vec::new();
    fn go(
        depth: usize,
        g: &Graph,
        q: &Graph,
        order: &[VertexId],
        by_label: &[Vec<VertexId>],
        mapping: &mut Vec<VertexId>,
        out: &mut Vec<Vec<VertexId>>,
    ) {
        if depth == order.len() {
            out.push(mapping.clone());
            return;
        }
        let u = order[depth];
        let Some(pool) = by_label.get(q.label(u) as usize) else {
            return;
        };
        for &v in pool {
            if mapping.contains(&v) {
                continue;
            }
            let consistent = q.neighbors(u).iter().all(|&w| {
                let img = mapping[w as usize];
                img == VertexId::MAX || g.has_edge(img, v)
            });
            if consistent {
                mapping[u as usize] = v;
                go(depth + 1, g, q, order, by_label, mapping, out);
                mapping[u as usize] = VertexId::MAX;
            }
        }
    }
    if n > 0 {
        go(0, g, q, &order, &by_label, &mut mapping, &mut out);
    }
    MatchSet {
        mappings: out,
        timings: StageTimings {
            refine: start.elapsed(),
            ..Default::default()
        },
        pruning: None,
    }
}

//! Synthetic data graphs and random-walk query workloads.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};

use crate::graph::{Graph, GraphError, LabelId, VertexId};

/// Restart budget for [`generate_query`].
pub const QUERY_RETRY_BUDGET: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistributionKind {
    Uniform,
    Gaussian,
    Zipf,
}

impl std::str::FromStr for DistributionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uni" => Ok(Self::Uniform),
            "gaussian" | "gau" | "normal" => Ok(Self::Gaussian),
            "zipf" => Ok(Self::Zipf),
            other => Err(format!("unknown label distribution {other:?}")),
        }
    }
}

/// How vertex labels are drawn. Labels are 0-based; the Gaussian is defined
/// over the 1-based range `[1, alphabet_size]` and shifted down after
/// rounding and clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution {
    pub kind: DistributionKind,
    pub alphabet_size: usize,
    pub gaussian_mean: f64,
    pub gaussian_stddev: f64,
    pub zipf_exponent: f64,
}

impl LabelDistribution {
    pub fn new(kind: DistributionKind, alphabet_size: usize) -> Self {
        let sigma = alphabet_size as f64;
        Self {
            kind,
            alphabet_size,
            gaussian_mean: (sigma + 1.0) / 2.0,
            gaussian_stddev: (sigma / 4.0).max(0.5),
            zipf_exponent: 1.0,
        }
    }

    pub fn uniform(alphabet_size: usize) -> Self {
        Self::new(DistributionKind::Uniform, alphabet_size)
    }

    pub fn gaussian(alphabet_size: usize) -> Self {
        Self::new(DistributionKind::Gaussian, alphabet_size)
    }

    pub fn zipf(alphabet_size: usize) -> Self {
        Self::new(DistributionKind::Zipf, alphabet_size)
    }

    fn sampler(&self) -> Result<LabelSampler, GraphError> {
        if self.alphabet_size == 0 || self.alphabet_size > LabelId::MAX as usize {
            return Err(GraphError::InvalidParameter(format!(
                "label alphabet size {} is out of range",
                self.alphabet_size
            )));
        }
        let sigma = self.alphabet_size;
        Ok(match self.kind {
            DistributionKind::Uniform => LabelSampler::Uniform(sigma),
            DistributionKind::Gaussian => {
                let normal = Normal::new(self.gaussian_mean, self.gaussian_stddev)
                    .map_err(|e| GraphError::InvalidParameter(format!("gaussian: {e}")))?;
                LabelSampler::Gaussian(normal, sigma)
            }
            DistributionKind::Zipf => {
                let zipf = Zipf::new(sigma as f64, self.zipf_exponent)
                    .map_err(|e| GraphError::InvalidParameter(format!("zipf: {e}")))?;
                LabelSampler::Zipf(zipf, sigma)
            }
        })
    }
}

enum LabelSampler {
    Uniform(usize),
    Gaussian(Normal<f64>, usize),
    Zipf(Zipf<f64>, usize),
}

impl LabelSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> LabelId {
        let one_based = match self {
            Self::Uniform(sigma) => return rng.random_range(0..*sigma) as LabelId,
            Self::Gaussian(normal, sigma) => normal.sample(rng).round().clamp(1.0, *sigma as f64),
            Self::Zipf(zipf, sigma) => zipf.sample(rng).round().clamp(1.0, *sigma as f64),
        };
        one_based as LabelId - 1
    }
}

/// Newman-Watts-Strogatz parameters that realize a target average degree:
/// `k` is the largest even ring degree below the target (at least 2) and the
/// shortcut probability makes up the rest in expectation.
pub fn nws_params_for_degree(avg_deg: f64) -> (usize, f64) {
    let mut k = (avg_deg.ceil() as usize).saturating_sub(1);
    k -= k % 2;
    let k = k.max(2);
    let p = (avg_deg / k as f64 - 1.0).clamp(0.0, 1.0);
    (k, p)
}

/// Newman-Watts-Strogatz small-world graph: a ring lattice where every vertex
/// links to its `k/2` nearest neighbors on each side, plus one random
/// shortcut per lattice edge with probability `p`. Lattice edges are never
/// removed, so the result is connected.
pub fn generate_synthetic(
    n: usize,
    k: usize,
    p: f64,
    dist: &LabelDistribution,
    seed: u64,
) -> Result<Graph, GraphError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(GraphError::InvalidParameter(format!(
            "ring degree k must be even and at least 2, got {k}"
        )));
    }
    if n < k + 1 {
        return Err(GraphError::InvalidParameter(format!(
            "need n >= k + 1 (n = {n}, k = {k})"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidParameter(format!(
            "shortcut probability {p} is outside [0, 1]"
        )));
    }
    let sampler = dist.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<LabelId> = (0..n).map(|_| sampler.sample(&mut rng)).collect();

    let mut edges: Vec<(VertexId, VertexId)> = Vec::with_capacity(n * k / 2);
    let mut present: HashSet<(VertexId, VertexId)> = HashSet::with_capacity(n * k);
    let mut degree = vec![0usize; n];
    let mut add = |u: usize, v: usize, edges: &mut Vec<_>, degree: &mut Vec<usize>| {
        let key = (u.min(v) as VertexId, u.max(v) as VertexId);
        if present.insert(key) {
            edges.push(key);
            degree[u] += 1;
            degree[v] += 1;
            true
        } else {
            false
        }
    };
    for j in 1..=k / 2 {
        for u in 0..n {
            add(u, (u + j) % n, &mut edges, &mut degree);
        }
    }
    if p > 0.0 {
        let lattice: Vec<(VertexId, VertexId)> = edges.clone();
        for (u, _) in lattice {
            let u = u as usize;
            if rng.random::<f64>() >= p || degree[u] >= n - 1 {
                continue;
            }
            loop {
                let w = rng.random_range(0..n);
                if w != u && add(u, w, &mut edges, &mut degree) {
                    break;
                }
            }
        }
    }
    edges.sort_unstable();
    Graph::from_edges(labels, &edges, Some(dist.alphabet_size))
}

/// A query graph cut out of a data graph, with the data vertex each query
/// vertex was copied from. `origin` is itself a valid match.
#[derive(Clone, Debug)]
pub struct QuerySample {
    pub graph: Graph,
    pub origin: Vec<VertexId>,
}

/// Number of query edges targeted for `size` vertices at `avg_deg`, kept
/// between a spanning tree and a clique.
pub fn query_edge_target(size: usize, avg_deg: f64) -> usize {
    let max_edges = size * size.saturating_sub(1) / 2;
    let wanted = (avg_deg * size as f64 / 2.0).round().max(0.0) as usize;
    wanted.clamp(size.saturating_sub(1), max_edges)
}

/// Random-walk query generation: walk until `size` distinct vertices are
/// collected, take the induced subgraph, and thin it to the target edge count
/// without disconnecting it. Walks whose induced subgraph is too sparse are
/// restarted, up to [`QUERY_RETRY_BUDGET`] times.
pub fn generate_query_sample(
    g: &Graph,
    size: usize,
    avg_deg: f64,
    seed: u64,
) -> Result<QuerySample, GraphError> {
    if size == 0 {
        return Err(GraphError::InvalidParameter("query size must be at least 1".into()));
    }
    if g.vertex_count() < size {
        return Err(GraphError::InvalidParameter(format!(
            "query size {size} exceeds data graph size {}",
            g.vertex_count()
        )));
    }
    let target = query_edge_target(size, avg_deg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_edges = 0usize;

    for _ in 0..QUERY_RETRY_BUDGET {
        let start = rng.random_range(0..g.vertex_count()) as VertexId;
        let Some(walk) = random_walk(g, start, size, &mut rng) else {
            continue;
        };
        let position = |v: VertexId| walk.iter().position(|&w| w == v);
        let mut induced: Vec<(VertexId, VertexId)> = Vec::new();
        for (i, &v) in walk.iter().enumerate() {
            for &w in g.neighbors(v) {
                if let Some(j) = position(w) {
                    if i < j {
                        induced.push((i as VertexId, j as VertexId));
                    }
                }
            }
        }
        best_edges = best_edges.max(induced.len());
        if induced.len() < target {
            continue;
        }
        let edges = thin_edges(size, induced, target, &mut rng);
        let labels = walk.iter().map(|&v| g.label(v)).collect();
        let graph = Graph::from_edges(labels, &edges, Some(g.label_alphabet_size()))?;
        return Ok(QuerySample {
            graph,
            origin: walk,
        });
    }
    Err(GraphError::RetriesExhausted {
        attempts: QUERY_RETRY_BUDGET,
        reason: format!("wanted {target} edges on {size} vertices, densest walk had {best_edges}"),
    })
}

pub fn generate_query(g: &Graph, size: usize, avg_deg: f64, seed: u64) -> Result<Graph, GraphError> {
    generate_query_sample(g, size, avg_deg, seed).map(|s| s.graph)
}

fn random_walk<R: Rng>(g: &Graph, start: VertexId, size: usize, rng: &mut R) -> Option<Vec<VertexId>> {
    let mut walk = vec![start];
    let mut current = start;
    let max_steps = 100 * size + 100;
    for _ in 0..max_steps {
        if walk.len() == size {
            break;
        }
        let nbrs = g.neighbors(current);
        if nbrs.is_empty() {
            return None;
        }
        current = nbrs[rng.random_range(0..nbrs.len())];
        if !walk.contains(&current) {
            walk.push(current);
        }
    }
    (walk.len() == size).then_some(walk)
}

/// Drops edges in random order, skipping any whose removal would disconnect
/// the graph, until `target` edges remain. A single pass suffices: an edge that
/// is a bridge stays a bridge as further edges are removed.
fn thin_edges<R: Rng>(
    n: usize,
    mut edges: Vec<(VertexId, VertexId)>,
    target: usize,
    rng: &mut R,
) -> Vec<(VertexId, VertexId)> {
    if edges.len() <= target {
        return edges;
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut alive = vec![true; edges.len()];
    let mut remaining = edges.len();
    for idx in order {
        if remaining == target {
            break;
        }
        alive[idx] = false;
        if connected_without(n, &edges, &alive) {
            remaining -= 1;
        } else {
            alive[idx] = true;
        }
    }
    let mut i = 0;
    edges.retain(|_| {
        i += 1;
        alive[i - 1]
    });
    edges
}

fn connected_without(n: usize, edges: &[(VertexId, VertexId)], alive: &[bool]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (e, &(u, v)) in edges.iter().enumerate() {
        if !alive[e] {
            continue;
        }
        let (a, b) = (find(&mut parent, u as usize), find(&mut parent, v as usize));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components == 1
}

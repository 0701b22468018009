//! The iLabel index: data vertices ordered by a dominance-preserving 1-D key
//! in a bulk-loaded B+-tree, with per-vertex MVEs and pruning synopses.

pub mod bptree;
pub mod keymap;
pub mod synopsis;

use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingSet, LabelEmbeddingTable};
use crate::graph::{Graph, LabelId, VertexId};

pub use bptree::{BPlusTree, DEFAULT_FANOUT};
pub use keymap::{compute_key, enforce_separation, l2_norm, KeyMap, Separation, SEPARATION_MARGIN};
pub use synopsis::{degree_synopsis, hop_synopsis, HopSynopsis, Mbr};

/// Default number of hop levels kept per vertex.
pub const DEFAULT_T_MAX: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("labels {first} and {second} have the same VLE norm {norm}; retrain or jitter the model")]
    CoincidentLabelNorms {
        first: LabelId,
        second: LabelId,
        norm: f64,
    },
    #[error("cannot separate label clusters: {0}")]
    SeparationUnattainable(String),
    #[error("invalid index config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexConfig {
    pub t_max: usize,
    pub fanout: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            t_max: DEFAULT_T_MAX,
            fanout: DEFAULT_FANOUT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ILabelIndex {
    pub(crate) dim: usize,
    pub(crate) t_max: usize,
    pub(crate) fanout: usize,
    /// Keys of all vertices in ascending `(key, vertex id)` order.
    pub(crate) keys: Vec<f64>,
    pub(crate) ids: Vec<VertexId>,
    /// Per vertex id.
    pub(crate) vertex_keys: Vec<f64>,
    pub(crate) mve: Vec<f64>,
    pub(crate) hop: Vec<f64>,
    pub(crate) degree_offsets: Vec<usize>,
    pub(crate) degree: Vec<f64>,
    pub(crate) key_map: KeyMap,
    pub(crate) tree: BPlusTree,
}

/// One `(key, vertex)` entry yielded by [`ILabelIndex::range_scan`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanEntry {
    pub key: f64,
    pub vertex: VertexId,
}

impl ILabelIndex {
    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    /// Effective `alpha`, possibly raised by separation enforcement. Query
    /// embeddings must be built with these weights.
    pub fn alpha(&self) -> f64 {
        self.key_map.alpha
    }

    pub fn beta(&self) -> f64 {
        self.key_map.beta
    }

    pub fn key_map(&self) -> &KeyMap {
        &self.key_map
    }

    pub fn tree(&self) -> &BPlusTree {
        &self.tree
    }

    pub fn sorted_keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn sorted_vertices(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn key(&self, v: VertexId) -> f64 {
        self.vertex_keys[v as usize]
    }

    pub fn mve(&self, v: VertexId) -> &[f64] {
        let d = self.dim;
        &self.mve[v as usize * d..(v as usize + 1) * d]
    }

    /// `(lower, upper)` of the `t`-hop synopsis of `v`, `1 <= t <= t_max`.
    pub fn hop_bounds(&self, v: VertexId, t: usize) -> (&[f64], &[f64]) {
        let rec = 2 * self.dim;
        let start = v as usize * self.t_max * rec + (t - 1) * rec;
        let r = &self.hop[start..start + rec];
        r.split_at(self.dim)
    }

    pub fn degree_of(&self, v: VertexId) -> usize {
        let v = v as usize;
        (self.degree_offsets[v + 1] - self.degree_offsets[v]) / (2 * self.dim)
    }

    /// `(lower, upper)` of the degree synopsis of `v` at `delta`, or `None`
    /// when `delta` is 0 or exceeds `deg(v)`.
    pub fn degree_bounds(&self, v: VertexId, delta: usize) -> Option<(&[f64], &[f64])> {
        if delta == 0 || delta > self.degree_of(v) {
            return None;
        }
        let rec = 2 * self.dim;
        let start = self.degree_offsets[v as usize] + (delta - 1) * rec;
        Some(self.degree[start..start + rec].split_at(self.dim))
    }

    /// Entries with key in `[lo, hi)` in key order, found by descending the
    /// tree and then following the leaf chain.
    pub fn range_scan(&self, lo: f64, hi: f64) -> impl Iterator<Item = ScanEntry> + '_ {
        self.tree.range(&self.keys, lo, hi).map(|pos| ScanEntry {
            key: self.keys[pos],
            vertex: self.ids[pos],
        })
    }

    pub(crate) fn rebuild_tree(&mut self) {
        self.tree = BPlusTree::bulk_load(&self.keys, self.fanout);
    }
}

/// Enforces cluster separation, materializes embeddings, keys and synopses,
/// and bulk-loads the tree.
///
/// The returned index carries the effective weights; a `table` whose `alpha`
/// had to be raised is not modified.
pub fn build_index(
    g: &Graph,
    table: &LabelEmbeddingTable,
    config: IndexConfig,
) -> Result<ILabelIndex, IndexError> {
    if config.t_max == 0 {
        return Err(IndexError::InvalidConfig("t_max must be at least 1".into()));
    }
    if config.fanout < 2 {
        return Err(IndexError::InvalidConfig("fanout must be at least 2".into()));
    }
    let mut table = table.clone();
    let raw = EmbeddingSet::compute(g, &table)?;
    let separation = keymap::enforce_separation_with(&table, g, &raw)?;
    let set = if separation.adjusted() {
        table.set_weights(separation.alpha, table.beta())?;
        EmbeddingSet::compute(g, &table)?
    } else {
        raw
    };

    let d = table.dim();
    let (alpha, beta) = (table.alpha(), table.beta());
    let vertex_keys: Vec<f64> = g
        .vertices()
        .map(|v| compute_key(set.vle(v), set.vse(v), alpha, beta))
        .collect();
    let mut order: Vec<VertexId> = g.vertices().collect();
    order.sort_by(|&a, &b| {
        vertex_keys[a as usize]
            .total_cmp(&vertex_keys[b as usize])
            .then(a.cmp(&b))
    });
    let keys: Vec<f64> = order.iter().map(|&v| vertex_keys[v as usize]).collect();

    let vles = table.vle_matrix();
    let mve = set.mves().iter().flatten().copied().collect();
    let hop = synopsis::all_hop_synopses(g, &vles, d, config.t_max);
    let (degree_offsets, degree) = synopsis::all_degree_synopses(g, &vles, d);
    let tree = BPlusTree::bulk_load(&keys, config.fanout);

    Ok(ILabelIndex {
        dim: d,
        t_max: config.t_max,
        fanout: config.fanout,
        keys,
        ids: order,
        vertex_keys,
        mve,
        hop,
        degree_offsets,
        degree,
        key_map: separation.key_map,
        tree,
    })
}

/// The table whose weights match `index`, for building query embeddings.
pub fn effective_table(table: &LabelEmbeddingTable, index: &ILabelIndex) -> Result<LabelEmbeddingTable, IndexError> {
    if table.dim() != index.dim() {
        return Err(IndexError::InvalidConfig(format!(
            "model dimension {} does not match index dimension {}",
            table.dim(),
            index.dim()
        )));
    }
    let mut t = table.clone();
    t.set_weights(index.alpha(), index.beta())?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_synthetic, LabelDistribution};

    fn sample_index(n: usize, labels: usize, seed: u64) -> (Graph, LabelEmbeddingTable, ILabelIndex) {
        let g = generate_synthetic(n, 4, 0.25, &LabelDistribution::uniform(labels), seed).unwrap();
        let mut t = LabelEmbeddingTable::random(labels, 2, 1e5, 1.0, seed).unwrap();
        t.set_l1_normalized(true);
        let idx = build_index(&g, &t, IndexConfig::default()).unwrap();
        (g, t, idx)
    }

    #[test]
    fn empty_graph_gives_empty_index() {
        let t = LabelEmbeddingTable::random(3, 2, 1.0, 1.0, 0).unwrap();
        let idx = build_index(&Graph::empty(), &t, IndexConfig::default()).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.range_scan(f64::NEG_INFINITY, f64::INFINITY).count(), 0);
    }

    #[test]
    fn leaves_hold_every_vertex_in_key_order() {
        let (g, _, idx) = sample_index(700, 6, 4);
        let scanned: Vec<ScanEntry> = idx.range_scan(f64::NEG_INFINITY, f64::INFINITY).collect();
        assert_eq!(scanned.len(), g.vertex_count());
        assert!(scanned.windows(2).all(|w| w[0].key <= w[1].key));
        let mut ids: Vec<_> = scanned.iter().map(|e| e.vertex).collect();
        ids.sort_unstable();
        assert_eq!(ids, g.vertices().collect::<Vec<_>>());
    }

    #[test]
    fn every_key_falls_in_its_label_interval() {
        let (g, _, idx) = sample_index(2_000, 9, 6);
        for v in g.vertices() {
            let (lo, hi) = idx.key_map().interval(g.label(v)).unwrap();
            let k = idx.key(v);
            assert!(lo <= k && k < hi, "vertex {v}: {k} not in [{lo}, {hi})");
        }
    }

    #[test]
    fn flat_hop_synopses_match_bfs() {
        let (g, t, idx) = sample_index(300, 5, 2);
        let t = effective_table(&t, &idx).unwrap();
        for v in g.vertices().step_by(7) {
            let h = hop_synopsis(&g, &t, v, idx.t_max());
            for level in 1..=idx.t_max() {
                let (lo, hi) = idx.hop_bounds(v, level);
                assert_eq!(lo, h.level(level).lower.as_slice());
                assert_eq!(hi, h.level(level).upper.as_slice());
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let t = LabelEmbeddingTable::random(3, 2, 1.0, 1.0, 0).unwrap();
        let g = Graph::from_edges(vec![0, 1], &[(0, 1)], None).unwrap();
        assert!(build_index(&g, &t, IndexConfig { t_max: 0, fanout: 64 }).is_err());
        assert!(build_index(&g, &t, IndexConfig { t_max: 2, fanout: 1 }).is_err());
    }
}

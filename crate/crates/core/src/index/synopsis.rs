//! Hop-based and degree-based MBR synopses.
//!
//! Storage is flat. For hop synopses, vertex `v` owns `t_max` consecutive
//! records of `2 * dim` values each: the lower corner then the upper corner.
//! Degree synopses hold one such record per `delta` in `1..=deg(v)`, located
//! through a per-vertex offset table.

use crate::embedding::{label_row, LabelEmbeddingTable};
use crate::graph::{Graph, VertexId};

/// Axis-aligned box with `lower ⪯ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mbr {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Mbr {
    pub(crate) fn from_record(record: &[f64]) -> Self {
        let d = record.len() / 2;
        Self {
            lower: record[..d].to_vec(),
            upper: record[d..].to_vec(),
        }
    }

    /// `self ⊆ other` with `epsilon` slack on every bound.
    pub fn within(&self, other: &Mbr, epsilon: f64) -> bool {
        box_within(&self.lower, &self.upper, &other.lower, &other.upper, epsilon)
    }

    pub fn contains_point(&self, p: &[f64], epsilon: f64) -> bool {
        point_within(p, &self.lower, &self.upper, epsilon)
    }
}

#[inline]
pub(crate) fn box_within(lo: &[f64], hi: &[f64], outer_lo: &[f64], outer_hi: &[f64], epsilon: f64) -> bool {
    lo.iter().zip(outer_lo).all(|(a, b)| *a + epsilon >= *b)
        && hi.iter().zip(outer_hi).all(|(a, b)| *a <= *b + epsilon)
}

#[inline]
pub(crate) fn point_within(p: &[f64], lo: &[f64], hi: &[f64], epsilon: f64) -> bool {
    p.iter()
        .zip(lo.iter().zip(hi))
        .all(|(x, (l, h))| *x + epsilon >= *l && *x <= *h + epsilon)
}

/// Per-hop bounds of one vertex; `levels[t - 1]` covers the `t`-hop ball.
#[derive(Clone, Debug, PartialEq)]
pub struct HopSynopsis {
    pub levels: Vec<Mbr>,
}

impl HopSynopsis {
    pub fn level(&self, t: usize) -> &Mbr {
        &self.levels[t - 1]
    }
}

/// Hop synopsis of `v` by explicit BFS over each ball.
pub fn hop_synopsis(g: &Graph, table: &LabelEmbeddingTable, v: VertexId, t_max: usize) -> HopSynopsis {
    let vles = table.vle_matrix();
    let d = table.dim();
    let levels = (1..=t_max)
        .map(|t| {
            let mut lower = vec![f64::INFINITY; d];
            let mut upper = vec![f64::NEG_INFINITY; d];
            for u in g.khop_neighborhood(v, t) {
                let x = label_row(&vles, d, g.label(u));
                for k in 0..d {
                    lower[k] = lower[k].min(x[k]);
                    upper[k] = upper[k].max(x[k]);
                }
            }
            Mbr { lower, upper }
        })
        .collect();
    HopSynopsis { levels }
}

/// Hop synopses of every vertex, flat. Uses the recurrence
/// `ball_t(v) = ball_{t-1}(v) ∪ ⋃_{u ∈ N(v)} ball_{t-1}(u)`, so each level
/// costs one pass over the edges.
pub(crate) fn all_hop_synopses(g: &Graph, vles: &[f64], d: usize, t_max: usize) -> Vec<f64> {
    let n = g.vertex_count();
    let rec = 2 * d;
    let stride = t_max * rec;
    let mut out = vec![0.0; n * stride];
    if t_max == 0 {
        return out;
    }
    // level 0: the vertex alone
    let mut prev = vec![0.0; n * rec];
    for v in g.vertices() {
        let x = label_row(vles, d, g.label(v));
        let r = &mut prev[v as usize * rec..(v as usize + 1) * rec];
        r[..d].copy_from_slice(x);
        r[d..].copy_from_slice(x);
    }
    let mut cur = vec![0.0; n * rec];
    for t in 0..t_max {
        for v in g.vertices() {
            let vi = v as usize;
            let mut acc = prev[vi * rec..(vi + 1) * rec].to_vec();
            for &u in g.neighbors(v) {
                let r = &prev[u as usize * rec..(u as usize + 1) * rec];
                for k in 0..d {
                    acc[k] = acc[k].min(r[k]);
                    acc[d + k] = acc[d + k].max(r[d + k]);
                }
            }
            cur[vi * rec..(vi + 1) * rec].copy_from_slice(&acc);
            out[vi * stride + t * rec..vi * stride + (t + 1) * rec].copy_from_slice(&acc);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    out
}

/// Bounds on the VSE of any `delta`-neighbor substructure of `v`, or `None`
/// when `delta` is zero or exceeds `deg(v)`.
pub fn degree_synopsis(g: &Graph, table: &LabelEmbeddingTable, v: VertexId, delta: usize) -> Option<Mbr> {
    if delta == 0 || delta > g.degree(v) {
        return None;
    }
    let vles = table.vle_matrix();
    let d = table.dim();
    let mut record = vec![0.0; 2 * d * g.degree(v)];
    vertex_degree_records(g, &vles, d, v, &mut record);
    let rec = 2 * d;
    Some(Mbr::from_record(&record[(delta - 1) * rec..delta * rec]))
}

/// Fills `out` (length `deg(v) * 2d`) with the degree records of `v`.
///
/// Lower bounds sum the `delta` smallest values per dimension in ascending
/// order; upper bounds sum the `delta` largest in descending order.
pub(crate) fn vertex_degree_records(g: &Graph, vles: &[f64], d: usize, v: VertexId, out: &mut [f64]) {
    let deg = g.degree(v);
    let rec = 2 * d;
    let mut column: Vec<f64> = Vec::with_capacity(deg);
    for k in 0..d {
        column.clear();
        column.extend(g.neighbors(v).iter().map(|&u| label_row(vles, d, g.label(u))[k]));
        column.sort_by(f64::total_cmp);
        let mut low = 0.0;
        let mut high = 0.0;
        for delta in 1..=deg {
            low += column[delta - 1];
            high += column[deg - delta];
            out[(delta - 1) * rec + k] = low;
            out[(delta - 1) * rec + d + k] = high;
        }
    }
}

/// Degree synopses of every vertex plus the start offset (in values) of each
/// vertex's records; `offsets` has `n + 1` entries.
pub(crate) fn all_degree_synopses(g: &Graph, vles: &[f64], d: usize) -> (Vec<usize>, Vec<f64>) {
    let rec = 2 * d;
    let mut offsets = Vec::with_capacity(g.vertex_count() + 1);
    offsets.push(0);
    for v in g.vertices() {
        offsets.push(offsets.last().unwrap() + g.degree(v) * rec);
    }
    let mut data = vec![0.0; *offsets.last().unwrap()];
    for v in g.vertices() {
        let vi = v as usize;
        vertex_degree_records(g, vles, d, v, &mut data[offsets[vi]..offsets[vi + 1]]);
    }
    (offsets, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::figure_table;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn degree_synopsis_worked_example() {
        let t = figure_table();
        let g = Graph::from_edges(vec![3, 0, 1, 2], &[(0, 1), (0, 2), (0, 3)], None).unwrap();
        let m1 = degree_synopsis(&g, &t, 0, 1).unwrap();
        assert!(close(&m1.lower, &[0.37, 0.22]) && close(&m1.upper, &[0.78, 0.63]));
        let m2 = degree_synopsis(&g, &t, 0, 2).unwrap();
        assert!(close(&m2.lower, &[0.93, 0.66]) && close(&m2.upper, &[1.34, 1.07]));
        let m3 = degree_synopsis(&g, &t, 0, 3).unwrap();
        assert!(close(&m3.lower, &[1.71, 1.29]) && close(&m3.upper, &[1.71, 1.29]));
        assert_eq!(degree_synopsis(&g, &t, 0, 4), None);
        assert_eq!(degree_synopsis(&g, &t, 1, 0), None);
    }

    #[test]
    fn hop_synopsis_worked_example() {
        let t = figure_table();
        // center label 3 = (0.5, 0.5), neighbors (0.78, 0.22) and (0.37, 0.63)
        let g = Graph::from_edges(vec![3, 0, 2], &[(0, 1), (0, 2)], None).unwrap();
        let h = hop_synopsis(&g, &t, 0, 1);
        assert!(close(&h.level(1).lower, &[0.37, 0.22]));
        assert!(close(&h.level(1).upper, &[0.78, 0.63]));

        let isolated = Graph::from_edges(vec![1], &[], None).unwrap();
        let h = hop_synopsis(&isolated, &t, 0, 3);
        let own = t.vle(1).unwrap();
        for level in &h.levels {
            assert_eq!(level.lower, own);
            assert_eq!(level.upper, own);
        }
    }

    #[test]
    fn containment_predicates() {
        let inner = Mbr { lower: vec![0.4, 0.3], upper: vec![0.6, 0.5] };
        let outer = Mbr { lower: vec![0.37, 0.22], upper: vec![0.78, 0.63] };
        assert!(inner.within(&outer, 0.0));
        assert!(!outer.within(&inner, 0.0));
        assert!(outer.contains_point(&[0.5, 0.5], 0.0));
        assert!(!outer.contains_point(&[0.8, 0.5], 0.0));
        assert!(outer.contains_point(&[0.78 + 1e-7, 0.5], 1e-6));
    }
}

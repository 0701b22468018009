//! Monotonic vertex embeddings.
//!
//! A vertex's label embedding (VLE) is the softplus of a trainable per-label
//! parameter row, optionally L1-normalized. Its structure embedding (VSE) is
//! the sum of its neighbors' VLEs, and the monotonic vertex embedding (MVE) is
//! `alpha * VLE + beta * VSE`. All three are non-negative, so dropping
//! neighbors can only move the MVE down in every coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, LabelId, VertexId};

/// Default embedding dimension.
pub const DEFAULT_DIM: usize = 2;
/// Default `alpha / beta` weight ratio.
pub const DEFAULT_RATIO: f64 = 100_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("label {label} is outside the table of {labels} labels")]
    LabelOutOfRange { label: LabelId, labels: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding set is empty")]
    Empty,
    #[error("invalid model: {0}")]
    InvalidTable(String),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Trainable per-label parameters of the embedding model plus the MVE weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelEmbeddingTable {
    dim: usize,
    labels: usize,
    raw: Vec<f64>,
    alpha: f64,
    beta: f64,
    l1_normalized: bool,
}

impl LabelEmbeddingTable {
    pub fn from_raw(
        labels: usize,
        dim: usize,
        raw: Vec<f64>,
        alpha: f64,
        beta: f64,
        l1_normalized: bool,
    ) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::InvalidTable("dimension must be at least 1".into()));
        }
        if raw.len() != labels * dim {
            return Err(EmbeddingError::InvalidTable(format!(
                "expected {} parameters for {labels} labels x {dim} dims, got {}",
                labels * dim,
                raw.len()
            )));
        }
        if let Some(x) = raw.iter().find(|x| !x.is_finite()) {
            return Err(EmbeddingError::InvalidTable(format!("non-finite parameter {x}")));
        }
        let table = Self {
            dim,
            labels,
            raw,
            alpha,
            beta,
            l1_normalized,
        };
        table.check_weights(alpha, beta)?;
        Ok(table)
    }

    /// Parameters drawn i.i.d. from `U[-1, 1]`.
    pub fn random(
        labels: usize,
        dim: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Result<Self, EmbeddingError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..labels * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::from_raw(labels, dim, raw, alpha, beta, false)
    }

    fn check_weights(&self, alpha: f64, beta: f64) -> Result<(), EmbeddingError> {
        if !(alpha >= 0.0 && alpha.is_finite() && beta >= 0.0 && beta.is_finite()) {
            return Err(EmbeddingError::InvalidTable(format!(
                "weights must be finite and non-negative (alpha = {alpha}, beta = {beta})"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_l1_normalized(&self) -> bool {
        self.l1_normalized
    }

    pub fn set_weights(&mut self, alpha: f64, beta: f64) -> Result<(), EmbeddingError> {
        self.check_weights(alpha, beta)?;
        self.alpha = alpha;
        self.beta = beta;
        Ok(())
    }

    pub fn set_l1_normalized(&mut self, on: bool) {
        self.l1_normalized = on;
    }

    pub fn raw_params(&self) -> &[f64] {
        &self.raw
    }

    pub(crate) fn raw_params_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    pub fn raw_row(&self, label: LabelId) -> &[f64] {
        let l = label as usize;
        &self.raw[l * self.dim..(l + 1) * self.dim]
    }

    /// The VLE of `label`.
    pub fn vle(&self, label: LabelId) -> Result<Vec<f64>, EmbeddingError> {
        if label as usize >= self.labels {
            return Err(EmbeddingError::LabelOutOfRange {
                label,
                labels: self.labels,
            });
        }
        let mut out = vec![0.0; self.dim];
        self.vle_into(label, &mut out);
        Ok(out)
    }

    fn vle_into(&self, label: LabelId, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.raw_row(label)) {
            *o = softplus(x);
        }
        if self.l1_normalized {
            let norm: f64 = out.iter().sum();
            out.iter_mut().for_each(|o| *o /= norm);
        }
    }

    /// VLEs of every label, row-major.
    pub fn vle_matrix(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.labels * self.dim];
        for l in 0..self.labels {
            self.vle_into(l as LabelId, &mut out[l * self.dim..(l + 1) * self.dim]);
        }
        out
    }

    pub(crate) fn check_graph(&self, g: &Graph) -> Result<(), EmbeddingError> {
        match g.labels().iter().find(|&&l| l as usize >= self.labels) {
            Some(&label) => Err(EmbeddingError::LabelOutOfRange {
                label,
                labels: self.labels,
            }),
            None => Ok(()),
        }
    }
}

/// Borrowed view over `len` vectors of dimension `dim` stored back to back.
#[derive(Clone, Copy, Debug)]
pub struct Vectors<'a> {
    dim: usize,
    data: &'a [f64],
}

impl<'a> Vectors<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged vector storage");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.data.chunks_exact(self.dim)
    }
}

/// VLE, VSE and MVE of every vertex of one graph under one table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    vle: Vec<f64>,
    vse: Vec<f64>,
    mve: Vec<f64>,
}

impl EmbeddingSet {
    pub fn compute(g: &Graph, table: &LabelEmbeddingTable) -> Result<Self, EmbeddingError> {
        table.check_graph(g)?;
        let d = table.dim();
        let labels = table.vle_matrix();
        let n = g.vertex_count();
        let mut vle = vec![0.0; n * d];
        let mut vse = vec![0.0; n * d];
        let mut mve = vec![0.0; n * d];
        for v in g.vertices() {
            let i = v as usize * d;
            let own = label_row(&labels, d, g.label(v));
            vle[i..i + d].copy_from_slice(own);
            let sum = &mut vse[i..i + d];
            for &u in g.neighbors(v) {
                add_assign(sum, label_row(&labels, d, g.label(u)));
            }
            for k in 0..d {
                mve[i + k] = table.alpha() * vle[i + k] + table.beta() * vse[i + k];
            }
        }
        Ok(Self { dim: d, vle, vse, mve })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vle.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vle.is_empty()
    }

    pub fn vle(&self, v: VertexId) -> &[f64] {
        row(&self.vle, self.dim, v as usize)
    }

    pub fn vse(&self, v: VertexId) -> &[f64] {
        row(&self.vse, self.dim, v as usize)
    }

    pub fn mve(&self, v: VertexId) -> &[f64] {
        row(&self.mve, self.dim, v as usize)
    }

    pub fn vles(&self) -> Vectors<'_> {
        Vectors::new(&self.vle, self.dim)
    }

    pub fn vses(&self) -> Vectors<'_> {
        Vectors::new(&self.vse, self.dim)
    }

    pub fn mves(&self) -> Vectors<'_> {
        Vectors::new(&self.mve, self.dim)
    }
}

#[inline]
pub(crate) fn row(data: &[f64], dim: usize, i: usize) -> &[f64] {
    &data[i * dim..(i + 1) * dim]
}

#[inline]
pub(crate) fn label_row(vles: &[f64], dim: usize, label: LabelId) -> &[f64] {
    row(vles, dim, label as usize)
}

#[inline]
pub(crate) fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub fn compute_vle(table: &LabelEmbeddingTable, label: LabelId) -> Result<Vec<f64>, EmbeddingError> {
    table.vle(label)
}

/// Sum of the neighbor VLEs of `v`, in neighbor-id order.
pub fn compute_vse(
    g: &Graph,
    table: &LabelEmbeddingTable,
    v: VertexId,
) -> Result<Vec<f64>, EmbeddingError> {
    let mut sum = vec![0.0; table.dim()];
    for &u in g.neighbors(v) {
        add_assign(&mut sum, &table.vle(g.label(u))?);
    }
    Ok(sum)
}

pub fn compute_mve(vle: &[f64], vse: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    vle.iter().zip(vse).map(|(l, s)| alpha * l + beta * s).collect()
}

/// `a ⪯ b` up to `epsilon`: `a[k] <= b[k] + epsilon` in every coordinate.
pub fn dominates(a: &[f64], b: &[f64], epsilon: f64) -> Result<bool, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dominated_within(a, b, epsilon))
}

#[inline]
pub(crate) fn dominated_within(a: &[f64], b: &[f64], epsilon: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= *y + epsilon)
}

/// Fraction of ordered pairs `(i, j)`, self-pairs included, with `o_i ⪯ o_j`.
pub fn discrete_cost(set: Vectors<'_>) -> Result<f64, EmbeddingError> {
    let n = set.len();
    if n == 0 {
        return Err(EmbeddingError::Empty);
    }
    Ok(dominance_pairs(set) as f64 / (n as f64 * n as f64))
}

/// Mean size of the dominance-induced candidate set, `n * discrete_cost`.
pub fn average_query_cost(set: Vectors<'_>) -> Result<f64, EmbeddingError> {
    let n = set.len();
    if n == 0 {
        return Err(EmbeddingError::Empty);
    }
    Ok(dominance_pairs(set) as f64 / n as f64)
}

fn dominance_pairs(set: Vectors<'_>) -> u64 {
    // Sorting by the first coordinate bounds the inner scan: o_i ⪯ o_j needs
    // o_j[0] >= o_i[0], and ties on that coordinate sit together.
    let d = set.dim();
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.get(a)[0].total_cmp(&set.get(b)[0]));
    let mut count = 0u64;
    let mut first_equal = 0;
    for (pos, &i) in order.iter().enumerate() {
        let a = set.get(i);
        if set.get(order[first_equal])[0] != a[0] {
            first_equal = pos;
        }
        for &j in &order[first_equal..] {
            let b = set.get(j);
            if (1..d).all(|k| a[k] <= b[k]) {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::figure_table;

    #[test]
    fn softplus_of_zero_and_large_negatives() {
        let t = LabelEmbeddingTable::from_raw(1, 2, vec![0.0, 0.0], 1.0, 1.0, false).unwrap();
        let v = t.vle(0).unwrap();
        assert!((v[0] - std::f64::consts::LN_2).abs() < 1e-15);
        let t = LabelEmbeddingTable::from_raw(1, 2, vec![-50.0, -50.0], 1.0, 1.0, false).unwrap();
        let v = t.vle(0).unwrap();
        assert!(v.iter().all(|&x| x > 0.0 && (x / (-50f64).exp() - 1.0).abs() < 1e-12));
        assert!((softplus(40.0) - 40.0).abs() < 1e-15);
    }

    #[test]
    fn l1_normalized_vles_sum_to_one() {
        let mut t = LabelEmbeddingTable::random(5, 3, 1.0, 1.0, 7).unwrap();
        t.set_l1_normalized(true);
        for l in 0..5 {
            let s: f64 = t.vle(l).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(matches!(t.vle(5), Err(EmbeddingError::LabelOutOfRange { .. })));
    }

    /// Table whose L1-normalized VLEs are the neighbor embeddings of the
    /// worked degree-synopsis example: (0.78, 0.22), (0.56, 0.44), (0.37, 0.63).
    #[test]
    fn structure_embedding_of_worked_example() {
        let t = figure_table();
        // center 0 with label 3, neighbors carrying labels 0, 1, 2
        let g = Graph::from_edges(vec![3, 0, 1, 2], &[(0, 1), (0, 2), (0, 3)], None).unwrap();
        let vse = compute_vse(&g, &t, 0).unwrap();
        assert!((vse[0] - 1.71).abs() < 1e-12 && (vse[1] - 1.29).abs() < 1e-12);
        let single = Graph::from_edges(vec![3, 0], &[(0, 1)], None).unwrap();
        let vse = compute_vse(&single, &t, 0).unwrap();
        assert!((vse[0] - 0.78).abs() < 1e-12 && (vse[1] - 0.22).abs() < 1e-12);
        let isolated = Graph::from_edges(vec![1], &[], None).unwrap();
        assert_eq!(compute_vse(&isolated, &t, 0).unwrap(), vec![0.0, 0.0]);

        let set = EmbeddingSet::compute(&g, &t).unwrap();
        assert_eq!(set.vse(0), compute_vse(&g, &t, 0).unwrap().as_slice());
        let expected = compute_mve(set.vle(0), set.vse(0), 10.0, 1.0);
        assert_eq!(set.mve(0), expected.as_slice());
    }

    #[test]
    fn mve_weighting() {
        let vle = [1.0, 1.0];
        let vse = [1.71, 1.29];
        assert_eq!(compute_mve(&vle, &vse, 1.0, 0.0), vle.to_vec());
        assert_eq!(compute_mve(&vle, &vse, 0.0, 1.0), vse.to_vec());
        let m = compute_mve(&vle, &vse, 10.0, 1.0);
        assert!((m[0] - 11.71).abs() < 1e-12 && (m[1] - 11.29).abs() < 1e-12);
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[1.0, 2.0], &[1.0, 2.0], 0.0).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0], 0.0).unwrap());
        assert!(dominates(&[0.37, 0.22], &[0.78, 0.63], 0.0).unwrap());
        assert!(dominates(&[1.0 + 1e-7], &[1.0], 1e-6).unwrap());
        assert_eq!(
            dominates(&[1.0], &[1.0, 2.0], 0.0),
            Err(EmbeddingError::DimensionMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn discrete_cost_small_cases() {
        let same = [1.0, 2.0, 1.0, 2.0];
        assert_eq!(discrete_cost(Vectors::new(&same, 2)).unwrap(), 1.0);
        assert_eq!(average_query_cost(Vectors::new(&same, 2)).unwrap(), 2.0);
        let crossed = [1.0, 2.0, 2.0, 1.0];
        assert_eq!(discrete_cost(Vectors::new(&crossed, 2)).unwrap(), 0.5);
        assert_eq!(discrete_cost(Vectors::new(&[], 2)), Err(EmbeddingError::Empty));
    }
}

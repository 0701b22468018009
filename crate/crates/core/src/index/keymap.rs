//! One-dimensional keys and label-cluster separation.

use crate::embedding::{EmbeddingSet, LabelEmbeddingTable};
use crate::graph::{Graph, LabelId};

use super::IndexError;

/// Relative head-room added when the weight ratio has to be raised.
pub const SEPARATION_MARGIN: f64 = 0.01;

#[inline]
pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `alpha * ||vle||_2 + beta * ||vse||_2`.
#[inline]
pub fn compute_key(vle: &[f64], vse: &[f64], alpha: f64, beta: f64) -> f64 {
    alpha * l2_norm(vle) + beta * l2_norm(vse)
}

/// Label clusters in key order.
///
/// Only labels that occur in the data graph get a cluster. Cluster `i` owns
/// the half-open key interval `[base_key[i], next_key[i])`, where `next_key`
/// is the base key of the following label and `+inf` for the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyMap {
    pub(crate) label_order: Vec<LabelId>,
    pub(crate) label_norms: Vec<f64>,
    pub(crate) base_key: Vec<f64>,
    pub(crate) next_key: Vec<f64>,
    /// Position of each label in `label_order`; `u32::MAX` when absent.
    pub(crate) position: Vec<u32>,
    pub(crate) max_vse_norm: f64,
    pub(crate) delta_min: Option<f64>,
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
}

impl KeyMap {
    pub fn label_order(&self) -> &[LabelId] {
        &self.label_order
    }

    pub fn max_vse_norm(&self) -> f64 {
        self.max_vse_norm
    }

    /// Smallest gap between consecutive label VLE norms; `None` with fewer
    /// than two labels.
    pub fn delta_min(&self) -> Option<f64> {
        self.delta_min
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cluster_count(&self) -> usize {
        self.label_order.len()
    }

    pub fn contains(&self, label: LabelId) -> bool {
        self.slot(label).is_some()
    }

    fn slot(&self, label: LabelId) -> Option<usize> {
        match self.position.get(label as usize) {
            Some(&p) if p != u32::MAX => Some(p as usize),
            _ => None,
        }
    }

    pub fn base_key(&self, label: LabelId) -> Option<f64> {
        self.slot(label).map(|p| self.base_key[p])
    }

    pub fn next_label_key(&self, label: LabelId) -> Option<f64> {
        self.slot(label).map(|p| self.next_key[p])
    }

    /// `[base, next)` key interval reserved for `label`.
    pub fn interval(&self, label: LabelId) -> Option<(f64, f64)> {
        self.slot(label).map(|p| (self.base_key[p], self.next_key[p]))
    }

    /// The ratio `M / delta_min` that `alpha / beta` must exceed.
    pub fn required_ratio(&self) -> f64 {
        match self.delta_min {
            Some(delta) => self.max_vse_norm / delta,
            None => 0.0,
        }
    }

    pub(crate) fn from_parts(
        label_order: Vec<LabelId>,
        label_norms: Vec<f64>,
        alphabet: usize,
        max_vse_norm: f64,
        alpha: f64,
        beta: f64,
    ) -> Self {
        let mut position = vec![u32::MAX; alphabet];
        for (p, &l) in label_order.iter().enumerate() {
            position[l as usize] = p as u32;
        }
        let delta_min = label_norms
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(f64::total_cmp);
        let base_key: Vec<f64> = label_norms.iter().map(|n| alpha * n).collect();
        let mut next_key: Vec<f64> = base_key.iter().skip(1).copied().collect();
        next_key.push(f64::INFINITY);
        Self {
            label_order,
            label_norms,
            base_key,
            next_key,
            position,
            max_vse_norm,
            delta_min,
            alpha,
            beta,
        }
    }
}

/// Result of checking the non-overlap condition `alpha / beta > M / delta_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct Separation {
    pub key_map: KeyMap,
    /// `alpha` in force after enforcement.
    pub alpha: f64,
    /// `alpha` before enforcement; differs from `alpha` when it was raised.
    pub original_alpha: f64,
}

impl Separation {
    pub fn adjusted(&self) -> bool {
        self.alpha != self.original_alpha
    }
}

/// Orders the labels of `g` by VLE norm, measures `M` and `delta_min`, and
/// raises `alpha` to `(M / delta_min) * beta * (1 + margin)` if the clusters
/// could otherwise overlap.
pub fn enforce_separation(
    table: &LabelEmbeddingTable,
    g: &Graph,
) -> Result<Separation, IndexError> {
    let set = EmbeddingSet::compute(g, table)?;
    enforce_separation_with(table, g, &set)
}

pub(crate) fn enforce_separation_with(
    table: &LabelEmbeddingTable,
    g: &Graph,
    set: &EmbeddingSet,
) -> Result<Separation, IndexError> {
    let mut order: Vec<(f64, LabelId)> = g
        .labels_in_use()
        .into_iter()
        .map(|l| Ok((l2_norm(&table.vle(l)?), l)))
        .collect::<Result<_, IndexError>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some(w) = order.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(IndexError::CoincidentLabelNorms {
            first: w[0].1,
            second: w[1].1,
            norm: w[0].0,
        });
    }
    let max_vse_norm = set.vses().iter().map(l2_norm).fold(0.0, f64::max);
    let (norms, labels): (Vec<f64>, Vec<LabelId>) = order.into_iter().unzip();

    let original_alpha = table.alpha();
    let beta = table.beta();
    let mut alpha = original_alpha;
    let provisional = KeyMap::from_parts(
        labels.clone(),
        norms.clone(),
        table.label_count(),
        max_vse_norm,
        alpha,
        beta,
    );
    let required = provisional.required_ratio();
    if beta > 0.0 && required > 0.0 && !(alpha / beta > required) {
        alpha = required * beta * (1.0 + SEPARATION_MARGIN);
    }
    if !alpha.is_finite() {
        return Err(IndexError::SeparationUnattainable(format!(
            "alpha would become {alpha} (M = {max_vse_norm}, required ratio {required})"
        )));
    }
    let key_map = if alpha == original_alpha {
        provisional
    } else {
        KeyMap::from_parts(labels, norms, table.label_count(), max_vse_norm, alpha, beta)
    };
    Ok(Separation {
        key_map,
        alpha,
        original_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_examples() {
        assert_eq!(compute_key(&[3.0, 4.0], &[0.0, 0.0], 10.0, 1.0), 50.0);
        let k = compute_key(&[0.0, 0.0], &[1.71, 1.29], 0.0, 1.0);
        assert!((k - (1.71f64.powi(2) + 1.29f64.powi(2)).sqrt()).abs() < 1e-15);
        assert!((k - 2.1420).abs() < 1e-4);
    }

    fn table_with_norms(norms: &[f64], alpha: f64, beta: f64) -> LabelEmbeddingTable {
        // 1-d VLE: softplus(raw) = norm
        let raw = norms.iter().map(|y| y.exp_m1().ln()).collect();
        LabelEmbeddingTable::from_raw(norms.len(), 1, raw, alpha, beta, false).unwrap()
    }

    #[test]
    fn ratio_condition_from_norms_and_max_vse() {
        let t = table_with_norms(&[1.0, 2.0], 1.0, 1.0);
        let g = Graph::from_edges(vec![0, 1], &[], None).unwrap();
        let s = enforce_separation(&t, &g).unwrap();
        assert_eq!(s.key_map.max_vse_norm(), 0.0);
        assert!(!s.adjusted());

        let t = table_with_norms(&[1.0, 2.0, 0.5], 0.3, 1.0);
        // vertex 0 (label 0) - vertex 2 (label 2): VSE norms 0.5 and 1.0
        let g = Graph::from_edges(vec![0, 1, 2], &[(0, 2)], None).unwrap();
        let s = enforce_separation(&t, &g).unwrap();
        assert!((s.key_map.max_vse_norm() - 1.0).abs() < 1e-12);
        let delta = s.key_map.delta_min().unwrap();
        assert!((delta - 0.5).abs() < 1e-12);
        assert!(s.adjusted());
        assert!((s.alpha - 2.0 * 1.01).abs() < 1e-9);
        assert_eq!(s.key_map.label_order(), &[2, 0, 1]);
    }

    #[test]
    fn two_labels_norms_one_and_two() {
        let km = KeyMap::from_parts(vec![0, 1], vec![1.0, 2.0], 3, 0.5, 0.6, 1.0);
        assert!((km.required_ratio() - 0.5).abs() < 1e-12);
        assert_eq!(km.interval(0), Some((0.6, 1.2)));
        assert_eq!(km.interval(1), Some((1.2, f64::INFINITY)));
        assert_eq!(km.interval(2), None);
    }

    #[test]
    fn single_label_is_unconstrained() {
        let t = table_with_norms(&[1.0], 1e-3, 1.0);
        let g = Graph::from_edges(vec![0, 0], &[(0, 1)], None).unwrap();
        let s = enforce_separation(&t, &g).unwrap();
        assert_eq!(s.key_map.delta_min(), None);
        assert!(!s.adjusted());
        assert_eq!(s.key_map.next_label_key(0), Some(f64::INFINITY));
    }

    #[test]
    fn coincident_norms_are_rejected() {
        let t = table_with_norms(&[1.0, 1.0], 1.0, 1.0);
        let g = Graph::from_edges(vec![0, 1], &[], None).unwrap();
        assert!(matches!(
            enforce_separation(&t, &g),
            Err(IndexError::CoincidentLabelNorms { .. })
        ));
    }
}

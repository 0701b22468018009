//! Cost-model training of the label embedding table.
//!
//! The discrete anti-dominance cost counts dominating pairs. Training
//! minimizes its sigmoid relaxation over uniformly sampled vertex pairs,
//! `sigma(min_k (o_i[k] - o_j[k]) / tau)`, with Adam while the temperature is
//! annealed. Gradients are derived by hand through the sigmoid, the min
//! selector, the MVE/VSE sums and softplus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::embedding::{
    add_assign, label_row, sigmoid, EmbeddingError, LabelEmbeddingTable, Vectors, DEFAULT_DIM,
    DEFAULT_RATIO,
};
use crate::graph::{Graph, VertexId};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("cannot train on an empty graph")]
    EmptyGraph,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnealCurve {
    Geometric,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub pairs_per_batch: usize,
    pub epochs: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub anneal: AnnealCurve,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            alpha: DEFAULT_RATIO,
            beta: 1.0,
            learning_rate: 0.01,
            pairs_per_batch: 4_096,
            epochs: 1_000,
            tau_start: 1.0,
            tau_end: 0.05,
            anneal: AnnealCurve::Geometric,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.pairs_per_batch == 0 {
            return bad("pairs per batch must be at least 1".into());
        }
        if !(self.tau_end > 0.0 && self.tau_start >= self.tau_end && self.tau_start.is_finite()) {
            return bad(format!(
                "temperatures must satisfy tau_start >= tau_end > 0 (got {} and {})",
                self.tau_start, self.tau_end
            ));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return bad(format!("weights must be finite and non-negative (alpha = {}, beta = {})", self.alpha, self.beta));
        }
        Ok(())
    }

    /// Temperature used at `epoch` (0-based).
    pub fn tau_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.tau_start;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        match self.anneal {
            AnnealCurve::Geometric => self.tau_start * (self.tau_end / self.tau_start).powf(frac),
            AnnealCurve::Linear => self.tau_start + (self.tau_end - self.tau_start) * frac,
        }
    }
}

#[inline]
fn argmin_diff(a: &[f64], b: &[f64]) -> (usize, f64) {
    let mut best = (0, a[0] - b[0]);
    for k in 1..a.len() {
        let diff = a[k] - b[k];
        // strict comparison routes ties to the lowest coordinate
        if diff < best.1 {
            best = (k, diff);
        }
    }
    best
}

/// Mean relaxed dominance over `pairs` of precomputed embeddings.
pub fn antidominance_loss(
    pairs: &[(VertexId, VertexId)],
    embeddings: Vectors<'_>,
    tau: f64,
) -> Result<f64, EmbeddingError> {
    if !(tau > 0.0) {
        return Err(EmbeddingError::NonPositiveTemperature(tau));
    }
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pairs
        .iter()
        .map(|&(i, j)| {
            let (_, diff) = argmin_diff(embeddings.get(i as usize), embeddings.get(j as usize));
            sigmoid(diff / tau)
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Loss over `pairs` of vertices of `g` and its gradient with respect to the
/// table's raw parameters (row-major, `labels x dim`).
pub fn antidominance_loss_with_grad(
    g: &Graph,
    table: &LabelEmbeddingTable,
    pairs: &[(VertexId, VertexId)],
    tau: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    if !(tau > 0.0) {
        return Err(EmbeddingError::NonPositiveTemperature(tau).into());
    }
    table.check_graph(g)?;
    let vles = table.vle_matrix();
    let mut workspace = Workspace::new(table.dim(), table.label_count());
    let loss = workspace.accumulate(g, table, &vles, pairs, tau);
    Ok((loss, workspace.raw_gradient(table)))
}

struct Workspace {
    dim: usize,
    grad_vle: Vec<f64>,
    o_i: Vec<f64>,
    o_j: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize, labels: usize) -> Self {
        Self {
            dim,
            grad_vle: vec![0.0; labels * dim],
            o_i: vec![0.0; dim],
            o_j: vec![0.0; dim],
        }
    }

    fn mve_into(g: &Graph, table: &LabelEmbeddingTable, vles: &[f64], v: VertexId, out: &mut [f64]) {
        let d = out.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for &u in g.neighbors(v) {
            add_assign(out, label_row(vles, d, g.label(u)));
        }
        let own = label_row(vles, d, g.label(v));
        for k in 0..d {
            out[k] = table.alpha() * own[k] + table.beta() * out[k];
        }
    }

    /// Adds `coef * d o(v) / d vle` along coordinate `k` into the VLE gradient.
    fn push_back(&mut self, g: &Graph, table: &LabelEmbeddingTable, v: VertexId, k: usize, coef: f64) {
        let d = self.dim;
        self.grad_vle[g.label(v) as usize * d + k] += coef * table.alpha();
        let b = coef * table.beta();
        if b != 0.0 {
            for &u in g.neighbors(v) {
                self.grad_vle[g.label(u) as usize * d + k] += b;
            }
        }
    }

    /// Mean loss over `pairs`; VLE gradients accumulate into `grad_vle`.
    fn accumulate(
        &mut self,
        g: &Graph,
        table: &LabelEmbeddingTable,
        vles: &[f64],
        pairs: &[(VertexId, VertexId)],
        tau: f64,
    ) -> f64 {
        self.grad_vle.iter_mut().for_each(|x| *x = 0.0);
        if pairs.is_empty() {
            return 0.0;
        }
        let scale = 1.0 / pairs.len() as f64;
        let mut total = 0.0;
        let mut o_i = std::mem::take(&mut self.o_i);
        let mut o_j = std::mem::take(&mut self.o_j);
        for &(i, j) in pairs {
            Self::mve_into(g, table, vles, i, &mut o_i);
            Self::mve_into(g, table, vles, j, &mut o_j);
            let (k, diff) = argmin_diff(&o_i, &o_j);
            let s = sigmoid(diff / tau);
            total += s;
            let coef = scale * s * (1.0 - s) / tau;
            if coef != 0.0 {
                self.push_back(g, table, i, k, coef);
                self.push_back(g, table, j, k, -coef);
            }
        }
        self.o_i = o_i;
        self.o_j = o_j;
        total * scale
    }

    /// Chains the VLE gradient through the optional L1 normalization and softplus.
    fn raw_gradient(&self, table: &LabelEmbeddingTable) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; self.grad_vle.len()];
        for (l, (g_row, out_row)) in self
            .grad_vle
            .chunks_exact(d)
            .zip(out.chunks_exact_mut(d))
            .enumerate()
        {
            let raw = &table.raw_params()[l * d..(l + 1) * d];
            if table.is_l1_normalized() {
                let sp: Vec<f64> = raw.iter().map(|&x| crate::embedding::softplus(x)).collect();
                let total: f64 = sp.iter().sum();
                let dot: f64 = g_row.iter().zip(&sp).map(|(a, b)| a * b).sum();
                for m in 0..d {
                    let d_sp = g_row[m] / total - dot / (total * total);
                    out_row[m] = d_sp * sigmoid(raw[m]);
                }
            } else {
                for m in 0..d {
                    out_row[m] = g_row[m] * sigmoid(raw[m]);
                }
            }
        }
        out
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

/// Pairs `(i, j)` with `i != j` drawn uniformly with replacement.
pub fn sample_pairs<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<(VertexId, VertexId)> {
    if n < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i as VertexId, j as VertexId)
        })
        .collect()
}

/// Table state before any update: parameters drawn from the config seed.
pub fn initial_table(g: &Graph, config: &TrainConfig) -> Result<LabelEmbeddingTable, TrainError> {
    config.validate()?;
    Ok(LabelEmbeddingTable::random(
        g.label_alphabet_size(),
        config.dim,
        config.alpha,
        config.beta,
        config.seed,
    )?)
}

pub fn train(g: &Graph, config: &TrainConfig) -> Result<LabelEmbeddingTable, TrainError> {
    train_with_observer(g, config, |_, _, _| {})
}

/// Like [`train`], calling `observer(epoch, tau, loss)` after every update.
pub fn train_with_observer<F>(
    g: &Graph,
    config: &TrainConfig,
    mut observer: F,
) -> Result<LabelEmbeddingTable, TrainError>
where
    F: FnMut(usize, f64, f64),
{
    if g.is_empty() {
        return Err(TrainError::EmptyGraph);
    }
    let mut table = initial_table(g, config)?;
    // Decorrelate the pair stream from the initialization stream.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(table.raw_params().len(), config.learning_rate);
    let mut workspace = Workspace::new(table.dim(), table.label_count());

    for epoch in 0..config.epochs {
        let tau = config.tau_at(epoch);
        let pairs = sample_pairs(g.vertex_count(), config.pairs_per_batch, &mut rng);
        let vles = table.vle_matrix();
        let loss = workspace.accumulate(g, &table, &vles, &pairs, tau);
        let grad = workspace.raw_gradient(&table);
        adam.update(table.raw_params_mut(), &grad);
        observer(epoch, tau, loss);
    }
    table.set_l1_normalized(true);
    Ok(table)
}

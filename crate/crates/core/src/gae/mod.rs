//! Graph autoencoder (GAE) and variational graph autoencoder (VGAE) over the
//! fused drug graph, with numeric drug features as node inputs.
//!
//! Encoder: two dense GCN layers without bias, ReLU after the first.
//! Decoder: inner product `sigmoid(z_i · z_j)` over all node pairs.

mod io;
mod train;

pub use io::{read_embedding_csv, read_model, write_embedding_csv, write_model};
pub use train::{loss_and_grad, train, Gradients, TrainOutput};

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ddr::DdrMatrix;
use crate::error::{Error, Result};
use crate::numerics::{check_finite, SeededStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Gae,
    Vgae,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gae => "gae",
            Variant::Vgae => "vgae",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "gae" => Ok(Variant::Gae),
            "vgae" => Ok(Variant::Vgae),
            other => Err(Error::InvalidParam(format!("unknown autoencoder variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
    /// Plain full-batch gradient descent.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaeConfig {
    pub hidden: usize,
    pub embedding: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub optimizer: Optimizer,
}

impl Default for GaeConfig {
    fn default() -> Self {
        GaeConfig {
            hidden: 128,
            embedding: 16,
            lr: 0.01,
            epochs: 500,
            seed: 0,
            variant: Variant::Gae,
            optimizer: Optimizer::Adam,
        }
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}`, the GCN propagation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency(Array2<f64>);

impl Deref for NormalizedAdjacency {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

pub fn normalize_adjacency(m: &DdrMatrix) -> NormalizedAdjacency {
    let n = m.len();
    let inv_sqrt: Vec<f64> = m.degrees().iter().map(|&d| 1.0 / ((d + 1) as f64).sqrt()).collect();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = inv_sqrt[i] * inv_sqrt[i];
        for j in 0..n {
            if i != j && m.data[[i, j]] == 1 {
                a[[i, j]] = inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    NormalizedAdjacency(a)
}

/// Encoder weights. `w1` is the output layer for GAE and the mean head for
/// VGAE; `w_logvar` is present only for VGAE.
#[derive(Debug, Clone, PartialEq)]
pub struct GaeModel {
    pub variant: Variant,
    pub seed: u64,
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
    pub w_logvar: Option<Array2<f64>>,
}

fn glorot(rows: usize, cols: usize, stream: &mut SeededStream) -> Array2<f64> {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || stream.uniform_range(-r, r))
}

impl GaeModel {
    /// Glorot-uniform initialization drawn from `stream`.
    pub fn init(features: usize, cfg: &GaeConfig, stream: &mut SeededStream) -> Self {
        let w0 = glorot(features, cfg.hidden, stream);
        let w1 = glorot(cfg.hidden, cfg.embedding, stream);
        let w_logvar = (cfg.variant == Variant::Vgae).then(|| glorot(cfg.hidden, cfg.embedding, stream));
        GaeModel {
            variant: cfg.variant,
            seed: cfg.seed,
            w0,
            w1,
            w_logvar,
        }
    }

    pub fn features(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w0.ncols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.w1.ncols()
    }

    fn check_dims(&self) -> Result<()> {
        let (h, d) = (self.hidden(), self.embedding_dim());
        if self.w1.nrows() != h {
            return Err(Error::DimensionMismatch(format!("w1 has {} rows, hidden is {h}", self.w1.nrows())));
        }
        match (&self.w_logvar, self.variant) {
            (None, Variant::Gae) => Ok(()),
            (Some(w), Variant::Vgae) if w.dim() == (h, d) => Ok(()),
            _ => Err(Error::DimensionMismatch("log-variance head does not match variant".into())),
        }
    }

    /// Short content hash of the weights, for embedding provenance.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.variant.to_string().as_bytes());
        for m in [Some(&self.w0), Some(&self.w1), self.w_logvar.as_ref()].into_iter().flatten() {
            h.update((m.nrows() as u64).to_le_bytes());
            h.update((m.ncols() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Encoder outputs. For GAE `mu` equals `z` and `logvar` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub hidden_pre: Array2<f64>,
    pub hidden: Array2<f64>,
    pub mu: Array2<f64>,
    pub logvar: Option<Array2<f64>>,
    pub z: Array2<f64>,
}

fn forward(model: &GaeModel, adj: &NormalizedAdjacency, x: &Array2<f64>, noise: Option<&Array2<f64>>) -> Result<Encoding> {
    model.check_dims()?;
    let n = adj.nrows();
    if x.nrows() != n || x.ncols() != model.features() {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, expected {}x{}",
            x.nrows(),
            x.ncols(),
            n,
            model.features()
        )));
    }
    let hidden_pre = adj.dot(&x.dot(&model.w0));
    let hidden = hidden_pre.mapv(|v| v.max(0.0));
    let mu = adj.dot(&hidden.dot(&model.w1));
    let logvar = model.w_logvar.as_ref().map(|w| adj.dot(&hidden.dot(w)));
    let z = match (&logvar, noise) {
        (Some(lv), Some(eps)) => {
            if eps.dim() != mu.dim() {
                return Err(Error::DimensionMismatch("noise shape differs from embedding".into()));
            }
            reparameterize(&mu, lv, eps)
        }
        _ => mu.clone(),
    };
    Ok(Encoding {
        hidden_pre,
        hidden,
        mu,
        logvar,
        z,
    })
}

/// `mu + exp(logvar / 2) ⊙ eps`.
pub fn reparameterize(mu: &Array2<f64>, logvar: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    let mut z = mu.clone();
    Zip::from(&mut z).and(logvar).and(eps).for_each(|z, &l, &e| *z += (0.5 * l).exp() * e);
    z
}

/// Runs the encoder. VGAE samples `z = mu + exp(logvar/2)·ε` with ε drawn
/// from `stream`; without a stream (or for GAE) `z = mu`.
pub fn encode(
    model: &GaeModel,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
    stream: Option<&mut SeededStream>,
) -> Result<Encoding> {
    let noise = match (model.variant, stream) {
        (Variant::Vgae, Some(s)) => Some(Array2::from_shape_simple_fn((adj.nrows(), model.embedding_dim()), || {
            s.gaussian()
        })),
        _ => None,
    };
    forward(model, adj, x, noise.as_ref())
}

/// Labels `A + I` with the class-balancing weights used by the loss.
#[derive(Debug, Clone)]
pub struct ReconTarget {
    pub labels: Array2<f64>,
    pub pos_weight: f64,
    pub norm: f64,
}

impl ReconTarget {
    pub fn new(m: &DdrMatrix) -> Self {
        let n = m.len();
        let mut labels = m.data.mapv(f64::from);
        for i in 0..n {
            labels[[i, i]] = 1.0;
        }
        let total = (n * n) as f64;
        let pos = labels.sum();
        let (pos_weight, norm) = if pos >= total {
            (1.0, 0.5)
        } else {
            ((total - pos) / pos, total / (2.0 * (total - pos)))
        };
        ReconTarget {
            labels,
            pos_weight,
            norm,
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weighted binary cross-entropy of `sigmoid(z zᵀ)` against `A + I`,
/// averaged over all N² pairs and scaled by `norm`.
pub fn reconstruction_loss(z: &Array2<f64>, m: &DdrMatrix) -> f64 {
    recon_loss_with(z, &ReconTarget::new(m))
}

pub(crate) fn recon_loss_with(z: &Array2<f64>, t: &ReconTarget) -> f64 {
    let logits = z.dot(&z.t());
    let mut acc = 0.0;
    Zip::from(&logits).and(&t.labels).for_each(|&s, &y| {
        acc += t.pos_weight * y * softplus(-s) + (1.0 - y) * softplus(s);
    });
    t.norm * acc / logits.len() as f64
}

/// `−(0.5/N) Σ (1 + logvar − mu² − exp(logvar))`.
pub fn kl_loss(mu: &Array2<f64>, logvar: &Array2<f64>) -> Result<f64> {
    if mu.dim() != logvar.dim() {
        return Err(Error::DimensionMismatch("mu and logvar shapes differ".into()));
    }
    check_finite(mu.view())?;
    check_finite(logvar.view())?;
    let n = mu.nrows().max(1) as f64;
    let mut acc = 0.0;
    Zip::from(mu).and(logvar).for_each(|&m, &l| acc += 1.0 + l - m * m - l.exp());
    Ok(-0.5 / n * acc)
}

/// Per-drug latent vectors, rows in graph id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub ids: Vec<String>,
    pub z: Array2<f64>,
    pub model_hash: String,
    pub seed: u64,
}

/// Rank-based ROC AUC of `z_i · z_j` scores, separating graph edges from
/// non-edges over all unordered pairs. Tied scores share the average rank.
pub fn edge_auc(z: &Array2<f64>, m: &DdrMatrix) -> f64 {
    let n = m.len();
    let logits = z.dot(&z.t());
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            scored.push((logits[[i, j]], m.data[[i, j]] == 1));
        }
    }
    let pos = scored.iter().filter(|s| s.1).count() as f64;
    let neg = scored.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return f64::NAN;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j + 1 < scored.len() && scored[j + 1].0 == scored[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * scored[i..=j].iter().filter(|s| s.1).count() as f64;
        i = j + 1;
    }
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

//! Skip-gram with negative sampling (SGNS) word embeddings.

mod io;
mod train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use io::{load_embeddings, read_binary, read_text, save_embeddings, write_text};
pub use train::train_embeddings;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub dim: usize,
    /// Maximum window; the effective window is drawn uniformly from `1..=window`
    /// for every center word.
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub subsample_threshold: f64,
    pub seed: u64,
    /// Single worker and a single RNG stream: output is bit-reproducible.
    pub deterministic: bool,
    /// Worker count when not deterministic; 0 means all available cores.
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            dim: 300,
            window: 4,
            min_count: 20,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            subsample_threshold: 1e-3,
            seed: 1,
            deterministic: true,
            threads: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if self.subsample_threshold.is_nan() || self.subsample_threshold < 0.0 {
            return bad("subsample_threshold must be non-negative");
        }
        Ok(())
    }
}

/// Trained (or loaded) word vectors, one row per word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f32>,
    context_vectors: Option<Vec<f32>>,
    counts: Option<Vec<u64>>,
}

impl EmbeddingMatrix {
    /// `vectors` is row-major, `words.len() × dim`.
    pub fn new(words: Vec<String>, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if vectors.len() != words.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: words.len() * dim,
                found: vectors.len(),
            });
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector of `{}`", words[i / dim.max(1)])));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        Ok(EmbeddingMatrix {
            words,
            index,
            dim,
            vectors,
            context_vectors: None,
            counts: None,
        })
    }

    pub(crate) fn with_training_state(mut self, context: Vec<f32>, counts: Vec<u64>) -> Self {
        debug_assert_eq!(context.len(), self.vectors.len());
        self.context_vectors = Some(context);
        self.counts = Some(counts);
        self
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector_of(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.vector(i))
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Output-side vectors; only present right after training.
    pub fn context_vector(&self, i: usize) -> Option<&[f32]> {
        self.context_vectors
            .as_ref()
            .map(|c| &c[i * self.dim..(i + 1) * self.dim])
    }

    /// Training-corpus counts in row order; only present right after training.
    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn max_row_norm(&self) -> f32 {
        self.vectors
            .chunks(self.dim.max(1))
            .map(|r| r.iter().map(|v| v * v).sum::<f32>().sqrt())
            .fold(0.0, f32::max)
    }
}

/// SGNS loss for one (center, positive context, negatives) tuple and its
/// analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `−[log σ(v·c⁺) + Σ log σ(−v·c⁻)]` and its gradients with respect to `v`,
/// `c⁺` and each `c⁻`.
pub fn sgns_loss_and_grad(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> Result<SgnsGrad> {
    let dim = center.len();
    for v in std::iter::once(positive).chain(negatives.iter().copied()) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let s_pos = dot(center, positive);
    let mut loss = -log_sigmoid(s_pos);
    // d/ds of −log σ(s) is −(1 − σ(s))
    let g_pos = -(1.0 - sigmoid(s_pos));
    let mut grad_center: Vec<f64> = positive.iter().map(|c| g_pos * c).collect();
    let grad_pos: Vec<f64> = center.iter().map(|v| g_pos * v).collect();

    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        loss -= log_sigmoid(-s);
        // d/ds of −log σ(−s) is σ(s)
        let g = sigmoid(s);
        for (gc, c) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g * c;
        }
        grad_negs.push(center.iter().map(|v| g * v).collect());
    }
    Ok(SgnsGrad {
        loss,
        center: grad_center,
        positive: grad_pos,
        negatives: grad_negs,
    })
}

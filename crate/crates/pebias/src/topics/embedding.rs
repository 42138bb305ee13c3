//! Skip-gram with negative sampling over random walks, yielding one vector
//! per graph node. Training is single-threaded on purpose: the contract is a
//! bit-reproducible embedding per seed, and lock-free parallel updates would
//! break that.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::seeding;
use crate::topics::graph::BipartiteGraph;

/// Embedding vectors for every user and item node, fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    /// One vector per user, indexed like the graph's user ids.
    pub user_vectors: Vec<Vec<f64>>,
    /// One vector per item, indexed like the graph's item ids.
    pub item_vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

/// Result of a training run; `epoch_loss` is the average skip-gram objective
/// per (center, context) pair in each epoch.
#[derive(Debug, Clone)]
pub struct SkipGramFit {
    pub embeddings: EmbeddingTable,
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// word2vec-style init: input vectors uniform in [-0.5/dim, 0.5/dim).
pub(crate) fn init_input_vectors(num_nodes: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seeding::derive_labeled(seed, "sgns-init"));
    (0..num_nodes * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect()
}

/// Unigram^(3/4) noise distribution over nodes, as cumulative weights.
fn noise_cumulative(walks: &[Vec<u32>], num_nodes: usize) -> Vec<f64> {
    let mut counts = vec![0u64; num_nodes];
    for walk in walks {
        for &n in walk {
            counts[n as usize] += 1;
        }
    }
    let mut cumulative = Vec::with_capacity(num_nodes);
    let mut total = 0.0;
    for c in counts {
        total += (c as f64).powf(0.75);
        cumulative.push(total);
    }
    cumulative
}

fn sample_noise(cumulative: &[f64], rng: &mut StdRng) -> u32 {
    let target = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
    cumulative.partition_point(|&c| c <= target) as u32
}

/// Train embeddings on walks. For every (center, context) pair within
/// `window` of each other, apply one positive update and `negatives`
/// noise-sampled updates of the logistic skip-gram objective.
pub fn train_embeddings(
    graph: &BipartiteGraph,
    walks: &[Vec<u32>],
    config: &SkipGramConfig,
) -> Result<SkipGramFit> {
    if walks.is_empty() {
        return Err(Error::EmptyInput);
    }
    if config.dim == 0 || config.window == 0 {
        return Err(Error::Config("dim and window must be >= 1".into()));
    }
    let num_nodes = graph.num_nodes();
    let dim = config.dim;
    let mut input = init_input_vectors(num_nodes, dim, config.seed);
    let mut output = vec![0.0f64; num_nodes * dim];
    let cumulative = noise_cumulative(walks, num_nodes);
    let mut rng = StdRng::seed_from_u64(seeding::derive_labeled(config.seed, "sgns-train"));
    let lr = config.learning_rate;

    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut center_grad = vec![0.0f64; dim];

    for _epoch in 0..config.epochs {
        let mut loss = 0.0;
        let mut pairs = 0u64;
        for walk in walks {
            for (pos, &center) in walk.iter().enumerate() {
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window).min(walk.len() - 1);
                for (ctx_pos, &context) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let c_off = center as usize * dim;
                    center_grad.fill(0.0);

                    // Positive update.
                    let o_off = context as usize * dim;
                    let mut dot = 0.0;
                    for k in 0..dim {
                        dot += input[c_off + k] * output[o_off + k];
                    }
                    let score = sigmoid(dot);
                    loss += -score.max(1e-12).ln();
                    let g = score - 1.0;
                    for k in 0..dim {
                        center_grad[k] += g * output[o_off + k];
                        output[o_off + k] -= lr * g * input[c_off + k];
                    }

                    // Negative updates.
                    for _ in 0..config.negatives {
                        let noise = sample_noise(&cumulative, &mut rng);
                        if noise == context {
                            continue;
                        }
                        let n_off = noise as usize * dim;
                        let mut dot = 0.0;
                        for k in 0..dim {
                            dot += input[c_off + k] * output[n_off + k];
                        }
                        let score = sigmoid(dot);
                        loss += -(1.0 - score).max(1e-12).ln();
                        for k in 0..dim {
                            center_grad[k] += score * output[n_off + k];
                            output[n_off + k] -= lr * score * input[c_off + k];
                        }
                    }

                    for k in 0..dim {
                        input[c_off + k] -= lr * center_grad[k];
                    }
                    pairs += 1;
                }
            }
        }
        epoch_loss.push(loss / pairs.max(1) as f64);
    }

    let nu = graph.num_users();
    let user_vectors = (0..nu)
        .map(|u| input[u * dim..(u + 1) * dim].to_vec())
        .collect();
    let item_vectors = (0..graph.num_items())
        .map(|i| input[(nu + i) * dim..(nu + i + 1) * dim].to_vec())
        .collect();
    Ok(SkipGramFit {
        embeddings: EmbeddingTable {
            dim,
            user_vectors,
            item_vectors,
        },
        epoch_loss,
    })
}

#[cfg(test)]
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..a.len() {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    dot / (na.sqrt() * nb.sqrt()).max(1e-300)
}

//! Diagonal-covariance Gaussian mixture fit by EM with k-means++ seeding,
//! and hard topic assignment from the fitted responsibilities.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::types::TopicAssignment;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Fitted mixture parameters. `trace` holds the total log-likelihood after
/// each EM iteration; it never decreases between consecutive iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iters: usize,
    /// Stop once the log-likelihood gain of an iteration falls below this.
    pub tol: f64,
    pub seed: u64,
    pub variance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 50,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            variance_floor: 1e-6,
        }
    }
}

fn ln_normal_diag(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut ll = 0.0;
    for j in 0..x.len() {
        let d = x[j] - mean[j];
        ll += -0.5 * (LN_2PI + var[j].ln()) - d * d / (2.0 * var[j]);
    }
    ll
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, later centers sampled with
/// probability proportional to squared distance from the nearest chosen one.
fn kmeanspp_means(vectors: &[Vec<f64>], k: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    means.push(vectors[rng.random_range(0..vectors.len())].clone());
    let mut dist: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v, &means[0]))
        .collect();
    while means.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a chosen center.
            rng.random_range(0..vectors.len())
        } else {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = vectors.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        means.push(vectors[next].clone());
        for (i, v) in vectors.iter().enumerate() {
            dist[i] = dist[i].min(squared_distance(v, means.last().unwrap()));
        }
    }
    means
}

fn per_dim_variance(vectors: &[Vec<f64>], floor: f64) -> Vec<f64> {
    let n = vectors.len() as f64;
    let dim = vectors[0].len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for j in 0..dim {
            mean[j] += v[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for v in vectors {
        for j in 0..dim {
            let d = v[j] - mean[j];
            var[j] += d * d;
        }
    }
    var.iter().map(|s| (s / n).max(floor)).collect()
}

/// EM fit of a diagonal-covariance mixture. A component whose weight
/// collapses below 1e-8 is re-seeded from the point farthest from every
/// current mean, and the fit continues.
pub fn fit_gmm(vectors: &[Vec<f64>], config: &GmmConfig) -> Result<GmmParams> {
    let n = vectors.len();
    let k = config.components;
    if k == 0 {
        return Err(Error::Config("need at least one component".into()));
    }
    if n < k {
        return Err(Error::Config(format!(
            "{n} vectors cannot support {k} components"
        )));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Config("inconsistent vector dimensions".into()));
    }

    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut means = kmeanspp_means(vectors, k, &mut rng);
    let data_var = per_dim_variance(vectors, config.variance_floor);
    let mut variances = vec![data_var.clone(); k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut resp = vec![0.0f64; n * k];
    let mut trace = Vec::new();

    for _iter in 0..config.max_iters {
        // E-step with log-sum-exp; accumulates the total log-likelihood.
        let mut ll = 0.0;
        for (i, x) in vectors.iter().enumerate() {
            let mut log_terms = vec![0.0; k];
            let mut max_term = f64::NEG_INFINITY;
            for c in 0..k {
                let t = weights[c].max(1e-300).ln() + ln_normal_diag(x, &means[c], &variances[c]);
                log_terms[c] = t;
                max_term = max_term.max(t);
            }
            let denom: f64 = log_terms.iter().map(|t| (t - max_term).exp()).sum();
            let log_denom = max_term + denom.ln();
            ll += log_denom;
            for c in 0..k {
                resp[i * k + c] = (log_terms[c] - log_denom).exp();
            }
        }

        // M-step.
        for c in 0..k {
            let total: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if total / (n as f64) < 1e-8 {
                // Degenerate component: re-seed from the farthest point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = means
                            .iter()
                            .map(|m| squared_distance(&vectors[a], m))
                            .fold(f64::INFINITY, f64::min);
                        let db = means
                            .iter()
                            .map(|m| squared_distance(&vectors[b], m))
                            .fold(f64::INFINITY, f64::min);
                        da.total_cmp(&db)
                    })
                    .expect("non-empty data");
                means[c] = vectors[far].clone();
                variances[c] = data_var.clone();
                weights[c] = 1e-3;
                let sum: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= sum;
                }
                continue;
            }
            weights[c] = total / n as f64;
            let mut mean = vec![0.0; dim];
            for (i, x) in vectors.iter().enumerate() {
                let r = resp[i * k + c];
                for j in 0..dim {
                    mean[j] += r * x[j];
                }
            }
            for m in &mut mean {
                *m /= total;
            }
            let mut var = vec![0.0; dim];
            for (i, x) in vectors.iter().enumerate() {
                let r = resp[i * k + c];
                for j in 0..dim {
                    let d = x[j] - mean[j];
                    var[j] += r * d * d;
                }
            }
            for v in &mut var {
                *v = (*v / total).max(config.variance_floor);
            }
            means[c] = mean;
            variances[c] = var;
        }

        let converged = trace
            .last()
            .map(|prev: &f64| ll - prev < config.tol)
            .unwrap_or(false);
        trace.push(ll);
        if converged {
            break;
        }
    }

    let log_likelihood = trace.last().copied().unwrap_or(f64::NEG_INFINITY);
    Ok(GmmParams {
        weights,
        means,
        variances,
        log_likelihood,
        trace,
    })
}

/// Index of the component with the largest responsibility for `x`; ties
/// break toward the lowest component index.
pub fn responsibility_argmax(gmm: &GmmParams, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for c in 0..gmm.weights.len() {
        let score =
            gmm.weights[c].max(1e-300).ln() + ln_normal_diag(x, &gmm.means[c], &gmm.variances[c]);
        if score > best_score {
            best_score = score;
            best = c;
        }
    }
    best
}

/// Assign every item to its argmax-responsibility component; component
/// indices are re-densified so empty components disappear. Each item gets
/// exactly one topic on this path.
pub fn assign_topics(
    gmm: &GmmParams,
    item_ids: &[String],
    vectors: &[Vec<f64>],
) -> Result<TopicAssignment> {
    if item_ids.len() != vectors.len() {
        return Err(Error::Config(format!(
            "{} ids but {} vectors",
            item_ids.len(),
            vectors.len()
        )));
    }
    if item_ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let raw: Vec<usize> = vectors
        .iter()
        .map(|v| responsibility_argmax(gmm, v))
        .collect();
    let used: std::collections::BTreeSet<usize> = raw.iter().copied().collect();
    let remap: BTreeMap<usize, usize> = used
        .iter()
        .enumerate()
        .map(|(dense, &orig)| (orig, dense))
        .collect();
    let mut by_item: BTreeMap<String, std::collections::BTreeSet<usize>> = BTreeMap::new();
    for (item, &component) in item_ids.iter().zip(&raw) {
        by_item
            .entry(item.clone())
            .or_default()
            .insert(remap[&component]);
    }
    TopicAssignment::new(by_item, used.len())
}

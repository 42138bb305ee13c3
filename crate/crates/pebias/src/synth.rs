//! Fully-synthetic user-topic preference generation and missing-not-at-random
//! observation sampling.
//!
//! Preferences come from a latent dot-product model quantized to five levels;
//! logged observations mix a positivity-biased component (higher ratings are
//! observed more often) with a uniform component, weighted by `alpha`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;
use crate::types::{
    FullPreferenceMatrix, PropensityModel, TopicInteractionTable, DEFAULT_RHO_MIN,
};

/// Parameters of the fully-synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_topics: usize,
    pub dim: usize,
    /// Mixing weight of the positivity-biased observation component.
    pub alpha: f64,
    /// Target overall observation rate of the logged (train) sample.
    pub sparsity: f64,
    /// Geometric decay of observation probability per rating level below 5.
    pub positivity_decay: f64,
    /// Rate of the uniformly-sampled unbiased test split.
    pub test_rate: f64,
    pub seed: u64,
    pub rho_min: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 1000,
            num_topics: 50,
            dim: 10,
            alpha: 1.0,
            sparsity: 0.05,
            positivity_decay: 0.5,
            test_rate: 0.05,
            seed: 0,
            rho_min: DEFAULT_RHO_MIN,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_topics == 0 || self.dim == 0 {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} not in [0,1]", self.alpha)));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::Config(format!(
                "sparsity {} not in (0,1]",
                self.sparsity
            )));
        }
        if !(self.positivity_decay > 0.0 && self.positivity_decay < 1.0) {
            return Err(Error::Config(format!(
                "positivity decay {} not in (0,1)",
                self.positivity_decay
            )));
        }
        if !(self.test_rate > 0.0 && self.test_rate < 1.0) {
            return Err(Error::Config(format!(
                "test rate {} not in (0,1)",
                self.test_rate
            )));
        }
        if !(self.rho_min > 0.0 && self.rho_min <= 1.0) {
            return Err(Error::Config(format!("rho_min {} invalid", self.rho_min)));
        }
        Ok(())
    }
}

/// Synthetic user id for row `u`; the external string form of a dense index.
pub fn synth_user_id(u: usize) -> String {
    format!("u{u}")
}

/// Map raw scores to levels {1..5} by global rank so each level holds an
/// equal share of cells. Ties broken by cell position.
pub(crate) fn quantile_levels(scores: &[f64]) -> Vec<u8> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut levels = vec![0u8; n];
    for (rank, &cell) in order.iter().enumerate() {
        levels[cell] = 1 + (5 * rank / n) as u8;
    }
    levels
}

/// Sample user and topic factors from N(0,1), take their dot products, and
/// quantize to five equal-mass levels. Deterministic per `config.seed`.
pub fn generate_full_preferences(config: &SynthConfig) -> Result<FullPreferenceMatrix> {
    config.validate()?;
    let mut rng = StdRng::seed_from_u64(seeding::derive_labeled(config.seed, "preferences"));
    let (n, t, d) = (config.num_users, config.num_topics, config.dim);
    let user_factors: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let topic_factors: Vec<f64> = (0..t * d).map(|_| StandardNormal.sample(&mut rng)).collect();

    let mut scores = vec![0.0f64; n * t];
    for u in 0..n {
        let p = &user_factors[u * d..(u + 1) * d];
        for j in 0..t {
            let q = &topic_factors[j * d..(j + 1) * d];
            let mut dot = 0.0;
            for k in 0..d {
                dot += p[k] * q[k];
            }
            scores[u * t + j] = dot;
        }
    }
    let values = quantile_levels(&scores)
        .into_iter()
        .map(f64::from)
        .collect();
    FullPreferenceMatrix::new(n, t, values)
}

/// Uniformly sample each cell with probability `rate`; the selection-bias-free
/// split. Cell order (and therefore output order) is row-major.
pub fn sample_unbiased_test(
    truth: &FullPreferenceMatrix,
    rate: f64,
    seed: u64,
) -> Result<TopicInteractionTable> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(format!("test rate {rate} not in (0,1]")));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = TopicInteractionTable::default();
    for u in 0..truth.num_users() {
        for t in 0..truth.num_topics() {
            if rng.random::<f64>() < rate {
                out.push(synth_user_id(u), t, truth.get(u, t));
            }
        }
    }
    Ok(out)
}

/// Per-cell observation probability of the logged-data mechanism:
/// `alpha * k * decay^(5 - y) + (1 - alpha) * sparsity`, before flooring.
fn mnar_rho(level: f64, k: f64, config: &SynthConfig) -> f64 {
    config.alpha * k * config.positivity_decay.powf(5.0 - level)
        + (1.0 - config.alpha) * config.sparsity
}

/// Sample the biased training log. `reserved` marks cells (row-major) that
/// belong to the test split and must not be drawn; pass an empty slice to
/// sample from every cell.
///
/// The positivity-bias scale `k` is normalized in one pass so the expected
/// observation rate over sampleable cells equals `config.sparsity`, then each
/// cell's probability is floored at `rho_min`. Draws use the floored value,
/// and the returned per-cell model stores exactly the probabilities drawn
/// against, so inverse-propensity weights are exact.
pub fn sample_mnar_observations(
    truth: &FullPreferenceMatrix,
    config: &SynthConfig,
    reserved: &[bool],
) -> Result<(TopicInteractionTable, PropensityModel)> {
    config.validate()?;
    let cells = truth.num_cells();
    if !reserved.is_empty() && reserved.len() != cells {
        return Err(Error::Config(format!(
            "reserved mask has {} cells, matrix has {cells}",
            reserved.len()
        )));
    }
    let is_reserved = |c: usize| !reserved.is_empty() && reserved[c];

    // One normalization pass: mean positivity weight over sampleable cells.
    let mut weight_sum = 0.0;
    let mut sampleable = 0usize;
    for c in 0..cells {
        if !is_reserved(c) {
            weight_sum += config.positivity_decay.powf(5.0 - truth.values()[c]);
            sampleable += 1;
        }
    }
    if sampleable == 0 {
        return Err(Error::Config("every cell is reserved".into()));
    }
    let mean_weight = weight_sum / sampleable as f64;
    let k = config.sparsity / mean_weight;
    // Feasibility: the largest cell probability (level 5) must stay <= 1.
    let peak = config.alpha * k + (1.0 - config.alpha) * config.sparsity;
    if peak > 1.0 + 1e-12 {
        let max_feasible = 1.0 / (config.alpha / mean_weight + (1.0 - config.alpha));
        return Err(Error::InfeasibleSparsity { max_feasible });
    }

    let mut rng = StdRng::seed_from_u64(seeding::derive_labeled(config.seed, "mnar"));
    let mut rho = Vec::with_capacity(cells);
    let mut train = TopicInteractionTable::default();
    let t = truth.num_topics();
    for c in 0..cells {
        let p = mnar_rho(truth.values()[c], k, config).clamp(config.rho_min, 1.0);
        rho.push(p);
        if !is_reserved(c) && rng.random::<f64>() < p {
            train.push(synth_user_id(c / t), c % t, truth.values()[c]);
        }
    }
    let model = PropensityModel::per_cell(truth.num_users(), t, rho, config.rho_min)?;
    Ok((train, model))
}

/// A complete fully-synthetic dataset: ground truth, disjoint biased train
/// and unbiased test splits, and the exact observation propensities.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub full: FullPreferenceMatrix,
    pub train: TopicInteractionTable,
    pub test: TopicInteractionTable,
    pub truth_propensities: PropensityModel,
}

/// End-to-end generation: preferences, then the unbiased test split, then
/// MNAR training observations from the remaining cells.
pub fn generate_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    let full = generate_full_preferences(config)?;
    let test = sample_unbiased_test(
        &full,
        config.test_rate,
        seeding::derive_labeled(config.seed, "test"),
    )?;
    let mut reserved = vec![false; full.num_cells()];
    for row in test.rows() {
        let u: usize = row.user[1..].parse().expect("synthetic user id");
        reserved[u * full.num_topics() + row.topic] = true;
    }
    let (train, truth_propensities) = sample_mnar_observations(&full, config, &reserved)?;
    Ok(SynthDataset {
        full,
        train,
        test,
        truth_propensities,
    })
}

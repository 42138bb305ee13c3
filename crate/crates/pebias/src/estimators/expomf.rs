//! Exposure-aware matrix factorization fit by EM, adapted from implicit
//! feedback to graded ratings: the observation indicator is the
//! exposure-relevant event, and an observed rating is a Gaussian observation
//! given exposure. Unexposed cells contribute a zero target weighted by
//! their exposure posterior in the M-step ridge regressions.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{Predictor, TopicDataset, RATING_MAX, RATING_MIN};

const MU_FLOOR: f64 = 1e-6;

/// Hyperparameters for [`train_expomf`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpoMfConfig {
    pub dim: usize,
    /// Ridge strength on user and topic factors.
    pub ridge: f64,
    /// Precision of the Gaussian observation noise.
    pub noise_precision: f64,
    pub max_iters: usize,
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ExpoMfConfig {
    fn default() -> Self {
        ExpoMfConfig {
            dim: 10,
            ridge: 0.1,
            noise_precision: 1.0,
            max_iters: 40,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl ExpoMfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.ridge <= 0.0 {
            return Err(Error::Config("ridge must be > 0".into()));
        }
        if self.noise_precision <= 0.0 {
            return Err(Error::Config("noise precision must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted exposure model. Predictions are the factor dot product; clamping to
/// the rating scale happens at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpoMfModel {
    pub num_users: usize,
    pub num_topics: usize,
    pub dim: usize,
    pub user_factors: Vec<f64>,
    pub topic_factors: Vec<f64>,
    /// Per-topic exposure prior, in (0, 1).
    pub exposure_prior: Vec<f64>,
    pub noise_precision: f64,
    /// Exposure posterior from the final E-step, |U|×|T| row-major. Empty
    /// when the model was loaded from disk rather than trained.
    pub exposure_posterior: Vec<f64>,
}

impl Predictor for ExpoMfModel {
    fn predict(&self, user: usize, topic: usize) -> f64 {
        let d = self.dim;
        let p = &self.user_factors[user * d..(user + 1) * d];
        let q = &self.topic_factors[topic * d..(topic + 1) * d];
        let mut dot = 0.0;
        for k in 0..d {
            dot += p[k] * q[k];
        }
        dot
    }
}

/// Fit result with the per-iteration EM objective (variational lower bound),
/// which never decreases across iterations.
#[derive(Debug, Clone)]
pub struct ExpoMfFit {
    pub model: ExpoMfModel,
    pub objective: Vec<f64>,
}

/// Posterior probability that an unobserved cell was exposed, given its
/// exposure prior and the Gaussian likelihood of the zero observation.
pub fn exposure_posterior(prior: f64, predicted_mean: f64, noise_precision: f64) -> f64 {
    if prior <= 0.0 {
        return 0.0;
    }
    if prior >= 1.0 {
        return 1.0;
    }
    let density = (noise_precision / (2.0 * std::f64::consts::PI)).sqrt()
        * (-0.5 * noise_precision * predicted_mean * predicted_mean).exp();
    prior * density / (prior * density + (1.0 - prior))
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Solve the SPD system `a x = b` in place via Cholesky; `None` when a pivot
/// collapses.
fn solve_spd(a: &mut [f64], b: &[f64], d: usize) -> Option<Vec<f64>> {
    // Lower-triangular factor, row-major in `a`.
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= a[i * d + k] * a[j * d + k];
            }
            if i == j {
                if sum <= 1e-300 {
                    return None;
                }
                a[i * d + j] = sum.sqrt();
            } else {
                a[i * d + j] = sum / a[j * d + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            x[i] -= a[i * d + k] * x[k];
        }
        x[i] /= a[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            x[i] -= a[k * d + i] * x[k];
        }
        x[i] /= a[i * d + i];
    }
    Some(x)
}

/// Ridge solve with escalating jitter: retry up to 3 times, multiplying the
/// jitter by 10 each time, before giving up.
fn ridge_solve(gram: &[f64], rhs: &[f64], d: usize, ridge: f64) -> Result<Vec<f64>> {
    let base_jitter = ridge.max(1e-8) * 1e-6;
    for attempt in 0..=3 {
        let jitter = if attempt == 0 {
            0.0
        } else {
            base_jitter * 10f64.powi(attempt)
        };
        let mut a = gram.to_vec();
        for i in 0..d {
            a[i * d + i] += ridge + jitter;
        }
        if let Some(x) = solve_spd(&mut a, rhs, d) {
            return Ok(x);
        }
    }
    Err(Error::SingularSystem { retries: 3 })
}

/// EM training loop. The E-step sets the exposure posterior (1 for observed
/// cells); the M-step solves per-row ridge regressions weighted by it and
/// refreshes the per-topic exposure priors.
pub fn train_expomf(train: &TopicDataset, config: &ExpoMfConfig) -> Result<ExpoMfFit> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }

    let d = config.dim;
    let (nu, nt) = (train.num_users, train.num_topics);
    let cells = nu * nt;
    let lambda_y = config.noise_precision;

    let mut observed = vec![false; cells];
    let mut ratings = vec![0.0; cells];
    for r in train.rows() {
        observed[r.user * nt + r.topic] = true;
        ratings[r.user * nt + r.topic] = r.rating;
    }

    let mut rng = StdRng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 0.1).expect("valid normal");
    let mut theta: Vec<f64> = (0..nu * d).map(|_| init.sample(&mut rng)).collect();
    let mut beta: Vec<f64> = (0..nt * d).map(|_| init.sample(&mut rng)).collect();

    let mut mu = vec![0.0f64; nt];
    for t in 0..nt {
        let rate = (0..nu).filter(|&u| observed[u * nt + t]).count() as f64 / nu as f64;
        mu[t] = rate.clamp(1e-3, 1.0 - 1e-3);
    }

    let mut gamma = vec![0.0f64; cells];
    let mut objective = Vec::with_capacity(config.max_iters);
    let half_ln_noise = 0.5 * (lambda_y / (2.0 * std::f64::consts::PI)).ln();

    for _iter in 0..config.max_iters {
        // E-step.
        for u in 0..nu {
            let p = &theta[u * d..(u + 1) * d];
            for t in 0..nt {
                let c = u * nt + t;
                if observed[c] {
                    gamma[c] = 1.0;
                } else {
                    let q = &beta[t * d..(t + 1) * d];
                    let mut m = 0.0;
                    for k in 0..d {
                        m += p[k] * q[k];
                    }
                    gamma[c] = exposure_posterior(mu[t], m, lambda_y);
                }
            }
        }

        // M-step: user rows.
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for u in 0..nu {
            gram.fill(0.0);
            rhs.fill(0.0);
            for t in 0..nt {
                let c = u * nt + t;
                let w = lambda_y * gamma[c];
                if w == 0.0 {
                    continue;
                }
                let q = &beta[t * d..(t + 1) * d];
                for i in 0..d {
                    let wq = w * q[i];
                    for j in 0..=i {
                        gram[i * d + j] += wq * q[j];
                    }
                    if observed[c] {
                        rhs[i] += wq * ratings[c];
                    }
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    gram[i * d + j] = gram[j * d + i];
                }
            }
            let row = ridge_solve(&gram, &rhs, d, config.ridge)?;
            theta[u * d..(u + 1) * d].copy_from_slice(&row);
        }

        // M-step: topic rows.
        for t in 0..nt {
            gram.fill(0.0);
            rhs.fill(0.0);
            for u in 0..nu {
                let c = u * nt + t;
                let w = lambda_y * gamma[c];
                if w == 0.0 {
                    continue;
                }
                let p = &theta[u * d..(u + 1) * d];
                for i in 0..d {
                    let wp = w * p[i];
                    for j in 0..=i {
                        gram[i * d + j] += wp * p[j];
                    }
                    if observed[c] {
                        rhs[i] += wp * ratings[c];
                    }
                }
            }
            for i in 0..d {
                for j in i + 1..d {
                    gram[i * d + j] = gram[j * d + i];
                }
            }
            let row = ridge_solve(&gram, &rhs, d, config.ridge)?;
            beta[t * d..(t + 1) * d].copy_from_slice(&row);
        }

        // M-step: exposure priors.
        for t in 0..nt {
            let total: f64 = (0..nu).map(|u| gamma[u * nt + t]).sum();
            mu[t] = (total / nu as f64).clamp(MU_FLOOR, 1.0 - MU_FLOOR);
        }

        // Variational lower bound at the end of the iteration.
        let mut bound = 0.0;
        for u in 0..nu {
            let p = &theta[u * d..(u + 1) * d];
            for t in 0..nt {
                let c = u * nt + t;
                let q = &beta[t * d..(t + 1) * d];
                let mut m = 0.0;
                for k in 0..d {
                    m += p[k] * q[k];
                }
                if observed[c] {
                    let e = ratings[c] - m;
                    bound += mu[t].ln() + half_ln_noise - 0.5 * lambda_y * e * e;
                } else {
                    let g = gamma[c];
                    bound += g * (mu[t].ln() + half_ln_noise - 0.5 * lambda_y * m * m)
                        + (1.0 - g) * (1.0 - mu[t]).ln()
                        - xlnx(g)
                        - xlnx(1.0 - g);
                }
            }
        }
        let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        bound -= 0.5 * config.ridge * (norm2(&theta) + norm2(&beta));

        let converged = objective
            .last()
            .map(|prev: &f64| {
                let rel = (bound - prev) / (prev.abs() + 1e-12);
                rel.abs() < config.tol
            })
            .unwrap_or(false);
        objective.push(bound);
        if converged {
            break;
        }
    }

    Ok(ExpoMfFit {
        model: ExpoMfModel {
            num_users: nu,
            num_topics: nt,
            dim: d,
            user_factors: theta,
            topic_factors: beta,
            exposure_prior: mu,
            noise_precision: lambda_y,
            exposure_posterior: gamma,
        },
        objective,
    })
}

/// Clamp a raw exposure-model prediction to the rating scale.
pub fn clamp_rating(value: f64) -> f64 {
    value.clamp(RATING_MIN, RATING_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, synth_user_id, SynthConfig};
    use crate::types::IdIndex;

    fn synthetic_train(seed: u64) -> TopicDataset {
        let config = SynthConfig {
            num_users: 60,
            num_topics: 12,
            sparsity: 0.15,
            seed,
            ..SynthConfig::default()
        };
        let ds = generate_dataset(&config).unwrap();
        let ids: Vec<String> = (0..config.num_users).map(synth_user_id).collect();
        let users = IdIndex::from_ids(ids.iter().map(String::as_str));
        ds.train.to_dataset(&users, config.num_topics).unwrap()
    }

    #[test]
    fn observed_cells_have_unit_posterior() {
        let train = synthetic_train(1);
        let fit = train_expomf(&train, &ExpoMfConfig::default()).unwrap();
        for r in train.rows() {
            let c = r.user * train.num_topics + r.topic;
            assert_eq!(fit.model.exposure_posterior[c], 1.0);
        }
    }

    #[test]
    fn zero_prior_means_zero_posterior() {
        assert_eq!(exposure_posterior(0.0, 1.3, 1.0), 0.0);
        assert_eq!(exposure_posterior(1.0, 1.3, 1.0), 1.0);
        let g = exposure_posterior(0.5, 0.0, 1.0);
        assert!(g > 0.0 && g < 1.0);
    }

    #[test]
    fn objective_never_decreases() {
        for seed in 0..5 {
            let train = synthetic_train(seed);
            let config = ExpoMfConfig {
                max_iters: 15,
                tol: 0.0,
                seed,
                ..ExpoMfConfig::default()
            };
            let fit = train_expomf(&train, &config).unwrap();
            for pair in fit.objective.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-6,
                    "objective dropped: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let train = synthetic_train(9);
        let config = ExpoMfConfig {
            max_iters: 5,
            seed: 4,
            ..ExpoMfConfig::default()
        };
        let a = train_expomf(&train, &config).unwrap();
        let b = train_expomf(&train, &config).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn solve_spd_rejects_singular() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0]; // rank 1
        assert!(solve_spd(&mut a, &[1.0, 1.0], 2).is_none());
        let mut ok = vec![2.0, 0.0, 0.0, 3.0];
        let x = solve_spd(&mut ok, &[2.0, 6.0], 2).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}

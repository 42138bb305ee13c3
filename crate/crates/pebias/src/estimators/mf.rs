//! Mini-batch Adam trainer for the biased matrix-factorization model, with
//! optional per-example inverse-propensity weighting. Training with unit
//! weights and training without a propensity model follow the exact same
//! code path, so the two are bitwise identical for the same seed.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::estimators::losses::{loss_ips, loss_naive, LossKind};
use crate::types::{FactorModel, Predictor, PropensityModel, TopicDataset};

/// Hyperparameters for [`train_mf`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    /// L2 penalty weight on factors and biases.
    pub l2: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 10,
            l2: 1e-3,
            learning_rate: 1e-2,
            batch_size: 256,
            epochs: 30,
            loss: LossKind::Squared,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be >= 1".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Config("l2 must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        Ok(())
    }
}

/// A trained model plus the per-epoch value of its training objective (the
/// naive estimator without propensities, the IPS estimator with them).
#[derive(Debug, Clone)]
pub struct MfFit {
    pub model: FactorModel,
    pub train_loss: Vec<f64>,
}

/// Gradient of one example's weighted loss `w * L(yhat, y)` with respect to
/// the parameters it touches, accumulated (scaled by `scale`) into the dense
/// scratch buffers. This is the exact formula the trainer applies.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_example_gradient(
    model: &FactorModel,
    user: usize,
    topic: usize,
    rating: f64,
    weight: f64,
    kind: LossKind,
    scale: f64,
    grad_user_factors: &mut [f64],
    grad_topic_factors: &mut [f64],
    grad_user_bias: &mut [f64],
    grad_topic_bias: &mut [f64],
) {
    let predicted = model.predict(user, topic);
    let dl = match kind {
        LossKind::Squared => 2.0 * (predicted - rating),
        LossKind::Absolute => (predicted - rating).signum(),
    };
    let g = scale * weight * dl;
    let d = model.dim;
    for k in 0..d {
        grad_user_factors[user * d + k] += g * model.topic_factors[topic * d + k];
        grad_topic_factors[topic * d + k] += g * model.user_factors[user * d + k];
    }
    grad_user_bias[user] += g;
    grad_topic_bias[topic] += g;
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// Lazy sparse Adam step on one coordinate with global bias correction.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        params: &mut [f64],
        idx: usize,
        grad: f64,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        correction1: f64,
        correction2: f64,
    ) {
        self.m[idx] = beta1 * self.m[idx] + (1.0 - beta1) * grad;
        self.v[idx] = beta2 * self.v[idx] + (1.0 - beta2) * grad * grad;
        let m_hat = self.m[idx] / correction1;
        let v_hat = self.v[idx] / correction2;
        params[idx] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Minimize the naive (`props = None`) or IPS-weighted training estimator
/// plus an L2 penalty by mini-batch Adam. Deterministic per `config.seed`:
/// initialization and the per-epoch shuffle draw from one fixed stream.
pub fn train_mf(
    train: &TopicDataset,
    config: &TrainConfig,
    props: Option<&PropensityModel>,
) -> Result<MfFit> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput);
    }

    let d = config.dim;
    let (nu, nt) = (train.num_users, train.num_topics);
    let mut rng = StdRng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 0.1).expect("valid normal");

    let mut model = FactorModel::zeros(nu, nt, d);
    for v in model.user_factors.iter_mut() {
        *v = init.sample(&mut rng);
    }
    for v in model.topic_factors.iter_mut() {
        *v = init.sample(&mut rng);
    }

    // Per-example weights, fixed across epochs: 1/rho when propensities are
    // given, 1 otherwise.
    let weights: Vec<f64> = match props {
        Some(p) => train
            .rows()
            .iter()
            .map(|r| p.rho(r.user, r.topic, r.level).map(|rho| 1.0 / rho))
            .collect::<Result<_>>()?,
        None => vec![1.0; train.len()],
    };

    // Global mean under the training estimator's own weighting, so the
    // biases only have to carry deviations, not a global shift. With unit
    // weights this is exactly the plain training mean.
    let weight_sum: f64 = weights.iter().sum();
    model.global_mean = train
        .rows()
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * r.rating)
        .sum::<f64>()
        / weight_sum;

    let mut adam_p = Adam::new(nu * d);
    let mut adam_q = Adam::new(nt * d);
    let mut adam_bu = Adam::new(nu);
    let mut adam_bt = Adam::new(nt);
    let mut grad_p = vec![0.0; nu * d];
    let mut grad_q = vec![0.0; nt * d];
    let mut grad_bu = vec![0.0; nu];
    let mut grad_bt = vec![0.0; nt];

    let mut order: Vec<usize> = (0..train.len()).collect();
    let (beta1, beta2, eps) = (config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    let mut beta1_pow = 1.0;
    let mut beta2_pow = 1.0;
    let mut train_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut touched_users: Vec<usize> = Vec::with_capacity(batch.len());
            let mut touched_topics: Vec<usize> = Vec::with_capacity(batch.len());
            for &i in batch {
                let r = &train.rows()[i];
                accumulate_example_gradient(
                    &model,
                    r.user,
                    r.topic,
                    r.rating,
                    weights[i],
                    config.loss,
                    scale,
                    &mut grad_p,
                    &mut grad_q,
                    &mut grad_bu,
                    &mut grad_bt,
                );
                touched_users.push(r.user);
                touched_topics.push(r.topic);
            }
            touched_users.sort_unstable();
            touched_users.dedup();
            touched_topics.sort_unstable();
            touched_topics.dedup();

            beta1_pow *= beta1;
            beta2_pow *= beta2;
            let c1 = 1.0 - beta1_pow;
            let c2 = 1.0 - beta2_pow;
            let lr = config.learning_rate;
            let reg = 2.0 * config.l2;

            for &u in &touched_users {
                for k in 0..d {
                    let idx = u * d + k;
                    let g = grad_p[idx] + reg * model.user_factors[idx];
                    adam_p.step(
                        &mut model.user_factors,
                        idx,
                        g,
                        lr,
                        beta1,
                        beta2,
                        eps,
                        c1,
                        c2,
                    );
                    grad_p[idx] = 0.0;
                }
                let g = grad_bu[u] + reg * model.user_bias[u];
                adam_bu.step(&mut model.user_bias, u, g, lr, beta1, beta2, eps, c1, c2);
                grad_bu[u] = 0.0;
            }
            for &t in &touched_topics {
                for k in 0..d {
                    let idx = t * d + k;
                    let g = grad_q[idx] + reg * model.topic_factors[idx];
                    adam_q.step(
                        &mut model.topic_factors,
                        idx,
                        g,
                        lr,
                        beta1,
                        beta2,
                        eps,
                        c1,
                        c2,
                    );
                    grad_q[idx] = 0.0;
                }
                let g = grad_bt[t] + reg * model.topic_bias[t];
                adam_bt.step(&mut model.topic_bias, t, g, lr, beta1, beta2, eps, c1, c2);
                grad_bt[t] = 0.0;
            }
        }

        let epoch_loss = match props {
            Some(p) => loss_ips(train, &model, p, train.num_cells(), config.loss)?,
            None => loss_naive(train, &model, config.loss)?,
        };
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                learning_rate: config.learning_rate,
            });
        }
        train_loss.push(epoch_loss);
    }

    Ok(MfFit { model, train_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};
    use rand::Rng;

    fn synthetic_train(seed: u64) -> (TopicDataset, PropensityModel) {
        let config = SynthConfig {
            num_users: 120,
            num_topics: 20,
            seed,
            ..SynthConfig::default()
        };
        let ds = generate_dataset(&config).unwrap();
        let users = crate::types::IdIndex::from_ids(
            (0..config.num_users)
                .map(crate::synth::synth_user_id)
                .collect::<Vec<_>>()
                .iter()
                .map(String::as_str),
        );
        let train = ds.train.to_dataset(&users, config.num_topics).unwrap();
        (train, ds.truth_propensities)
    }

    #[test]
    fn unit_propensities_match_unweighted_bitwise() {
        let (train, _) = synthetic_train(1);
        let config = TrainConfig {
            epochs: 5,
            seed: 42,
            ..TrainConfig::default()
        };
        let ones = PropensityModel::constant(1.0, 1e-6);
        let a = train_mf(&train, &config, None).unwrap();
        let b = train_mf(&train, &config, Some(&ones)).unwrap();
        // The parameter trajectory is bitwise identical; the recorded traces
        // differ only by the estimator's normalization (observed count vs
        // full cell count).
        assert_eq!(a.model, b.model);
        let ratio = train.len() as f64 / train.num_cells() as f64;
        for (na, ips) in a.train_loss.iter().zip(&b.train_loss) {
            assert!((na * ratio - ips).abs() <= 1e-12 * ips.abs().max(1.0));
        }
    }

    #[test]
    fn training_loss_decreases_early() {
        let (train, props) = synthetic_train(2);
        let config = TrainConfig {
            epochs: 5,
            seed: 7,
            ..TrainConfig::default()
        };
        for p in [None, Some(&props)] {
            let fit = train_mf(&train, &config, p).unwrap();
            assert!(
                fit.train_loss[4] < fit.train_loss[0],
                "trace {:?}",
                fit.train_loss
            );
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (train, props) = synthetic_train(3);
        let config = TrainConfig {
            epochs: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train_mf(&train, &config, Some(&props)).unwrap();
        let b = train_mf(&train, &config, Some(&props)).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn divergence_is_reported() {
        let (train, _) = synthetic_train(4);
        // Adam bounds each step by the learning rate, so overflow needs a
        // rate large enough that a single step sends dot products to inf.
        let config = TrainConfig {
            learning_rate: 1e200,
            epochs: 30,
            seed: 5,
            ..TrainConfig::default()
        };
        match train_mf(&train, &config, None) {
            Err(Error::Divergence { learning_rate, .. }) => {
                assert_eq!(learning_rate, 1e200)
            }
            Ok(fit) => {
                // An absurd step size must not silently pass as converged.
                assert!(fit.train_loss.iter().all(|l| l.is_finite()));
                panic!("expected divergence, got finite trace {:?}", fit.train_loss);
            }
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (train, props) = synthetic_train(6);
        let config = TrainConfig {
            epochs: 1,
            seed: 13,
            ..TrainConfig::default()
        };
        let fit = train_mf(&train, &config, Some(&props)).unwrap();
        let mut model = fit.model;
        let d = model.dim;
        let mut rng = rand::rngs::StdRng::seed_from_u64(99);

        for _ in 0..20 {
            let row = train.rows()[rng.random_range(0..train.len())];
            let weight = 1.0 / props.rho(row.user, row.topic, row.level).unwrap();

            // Pick a random coordinate among the four parameter groups.
            let group = rng.random_range(0..4);
            let k = rng.random_range(0..d);

            let mut gp = vec![0.0; model.num_users * d];
            let mut gq = vec![0.0; model.num_topics * d];
            let mut gbu = vec![0.0; model.num_users];
            let mut gbt = vec![0.0; model.num_topics];
            accumulate_example_gradient(
                &model,
                row.user,
                row.topic,
                row.rating,
                weight,
                LossKind::Squared,
                1.0,
                &mut gp,
                &mut gq,
                &mut gbu,
                &mut gbt,
            );

            let analytic = match group {
                0 => gp[row.user * d + k],
                1 => gq[row.topic * d + k],
                2 => gbu[row.user],
                _ => gbt[row.topic],
            };
            let get = |m: &FactorModel| match group {
                0 => m.user_factors[row.user * d + k],
                1 => m.topic_factors[row.topic * d + k],
                2 => m.user_bias[row.user],
                _ => m.topic_bias[row.topic],
            };
            let set = |m: &mut FactorModel, v: f64| match group {
                0 => m.user_factors[row.user * d + k] = v,
                1 => m.topic_factors[row.topic * d + k] = v,
                2 => m.user_bias[row.user] = v,
                _ => m.topic_bias[row.topic] = v,
            };

            let h = 1e-5;
            let original = get(&model);
            set(&mut model, original + h);
            let up = weight * LossKind::Squared.eval(model.predict(row.user, row.topic), row.rating);
            set(&mut model, original - h);
            let down =
                weight * LossKind::Squared.eval(model.predict(row.user, row.topic), row.rating);
            set(&mut model, original);

            let numeric = (up - down) / (2.0 * h);
            let denom = numeric.abs().max(analytic.abs()).max(1e-12);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-4,
                "group {group} coord {k}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }
}

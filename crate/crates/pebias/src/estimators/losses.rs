//! Rating-prediction loss estimators: the ideal full-matrix loss, the naive
//! observed-only average, the inverse-propensity-scored estimator that is
//! unbiased for the ideal loss under known observation propensities, and its
//! self-normalized variant.

use crate::error::{Error, Result};
use crate::types::{FullPreferenceMatrix, Predictor, PropensityModel, TopicDataset};

/// Pointwise loss applied to a (prediction, rating) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Squared,
    Absolute,
}

impl LossKind {
    pub fn eval(&self, predicted: f64, actual: f64) -> f64 {
        let e = predicted - actual;
        match self {
            LossKind::Squared => e * e,
            LossKind::Absolute => e.abs(),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "absolute" => Ok(LossKind::Absolute),
            other => Err(Error::Config(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Average loss over every cell of the complete rating matrix. Only
/// computable in synthetic settings where the ground truth exists.
pub fn loss_ideal(
    truth: &FullPreferenceMatrix,
    model: &impl Predictor,
    kind: LossKind,
) -> f64 {
    let mut total = 0.0;
    for u in 0..truth.num_users() {
        for t in 0..truth.num_topics() {
            total += kind.eval(model.predict(u, t), truth.get(u, t));
        }
    }
    total / truth.num_cells() as f64
}

/// Average loss over observed cells only; biased under selection bias.
pub fn loss_naive(
    observed: &TopicDataset,
    model: &impl Predictor,
    kind: LossKind,
) -> Result<f64> {
    if observed.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = observed
        .rows()
        .iter()
        .map(|r| kind.eval(model.predict(r.user, r.topic), r.rating))
        .sum();
    Ok(total / observed.len() as f64)
}

/// Inverse-propensity-scored loss: each observed term is weighted by `1/rho`
/// and the sum is normalized by the full cell count `num_cells`, making the
/// estimator unbiased for [`loss_ideal`] when the propensities are exact.
pub fn loss_ips(
    observed: &TopicDataset,
    model: &impl Predictor,
    props: &PropensityModel,
    num_cells: usize,
    kind: LossKind,
) -> Result<f64> {
    if num_cells == 0 {
        return Err(Error::Config("num_cells must be positive".into()));
    }
    let mut total = 0.0;
    for r in observed.rows() {
        let rho = props.rho(r.user, r.topic, r.level)?;
        total += kind.eval(model.predict(r.user, r.topic), r.rating) / rho;
    }
    Ok(total / num_cells as f64)
}

/// Self-normalized IPS: the weighted loss sum divided by the weight sum.
/// Trades a small bias for lower variance and is invariant to rescaling all
/// propensities by a common factor.
pub fn snips_loss(
    validation: &TopicDataset,
    model: &impl Predictor,
    props: &PropensityModel,
    kind: LossKind,
) -> Result<f64> {
    if validation.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut weighted = 0.0;
    let mut weights = 0.0;
    for r in validation.rows() {
        let w = 1.0 / props.rho(r.user, r.topic, r.level)?;
        weighted += w * kind.eval(model.predict(r.user, r.topic), r.rating);
        weights += w;
    }
    Ok(weighted / weights)
}

//! Unbiased-test-set evaluation: rating-accuracy metrics, NDCG@k ranking
//! quality, user-stratified cross-validation driven by the SNIPS estimator,
//! and paired significance testing over per-seed scores.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimators::expomf::{train_expomf, ExpoMfConfig};
use crate::estimators::losses::{snips_loss, LossKind};
use crate::estimators::mf::{train_mf, TrainConfig};
use crate::types::{Predictor, PropensityModel, TopicDataset};

/// MAE and MSE over a test set, predictions clamped to the rating scale.
pub fn rating_metrics(test: &TopicDataset, model: &impl Predictor) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut abs = 0.0;
    let mut sq = 0.0;
    for r in test.rows() {
        let e = model.predict_clamped(r.user, r.topic) - r.rating;
        abs += e.abs();
        sq += e * e;
    }
    let n = test.len() as f64;
    Ok((abs / n, sq / n))
}

fn gain(level: u8) -> f64 {
    ((1u32 << level) - 1) as f64
}

/// NDCG truncated at rank `k`, averaged over users with at least two test
/// topics. Topics are ranked by predicted score descending, ties broken by
/// ascending topic index; gains are `2^level - 1` with a `log2(rank + 1)`
/// discount.
pub fn ndcg_at_k(test: &TopicDataset, model: &impl Predictor, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut by_user: HashMap<usize, Vec<(usize, u8)>> = HashMap::new();
    for r in test.rows() {
        by_user.entry(r.user).or_default().push((r.topic, r.level));
    }
    let mut users: Vec<usize> = by_user.keys().copied().collect();
    users.sort_unstable();

    let mut total = 0.0;
    let mut qualifying = 0usize;
    for user in users {
        let topics = &by_user[&user];
        if topics.len() < 2 {
            continue;
        }
        let mut ranked: Vec<(usize, u8, f64)> = topics
            .iter()
            .map(|&(topic, level)| (topic, level, model.predict(user, topic)))
            .collect();
        ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

        let depth = k.min(ranked.len());
        let mut dcg = 0.0;
        for (j, &(_, level, _)) in ranked.iter().take(depth).enumerate() {
            dcg += gain(level) / ((j + 2) as f64).log2();
        }

        let mut ideal_levels: Vec<u8> = topics.iter().map(|&(_, level)| level).collect();
        ideal_levels.sort_unstable_by(|a, b| b.cmp(a));
        let mut idcg = 0.0;
        for (j, &level) in ideal_levels.iter().take(depth).enumerate() {
            idcg += gain(level) / ((j + 2) as f64).log2();
        }

        total += dcg / idcg;
        qualifying += 1;
    }
    if qualifying == 0 {
        return Err(Error::NoRankableUsers);
    }
    Ok(total / qualifying as f64)
}

/// Fold id per row: user-stratified round-robin, so each user's interactions
/// spread across folds and every row lands in exactly one validation fold.
/// Purely positional, hence deterministic.
pub fn fold_assignments(data: &TopicDataset, folds: usize) -> Vec<usize> {
    let mut per_user_count: HashMap<usize, usize> = HashMap::new();
    let mut user_ordinal: HashMap<usize, usize> = HashMap::new();
    let mut next_ordinal = 0usize;
    data.rows()
        .iter()
        .map(|r| {
            let ordinal = *user_ordinal.entry(r.user).or_insert_with(|| {
                let o = next_ordinal;
                next_ordinal += 1;
                o
            });
            let count = per_user_count.entry(r.user).or_insert(0);
            let fold = (ordinal + *count) % folds;
            *count += 1;
            fold
        })
        .collect()
}

fn cv_mean_scores<C, M, F>(
    train: &TopicDataset,
    grid: &[C],
    folds: usize,
    eval_props: &PropensityModel,
    fit: F,
) -> Result<Vec<f64>>
where
    M: Predictor,
    F: Fn(&TopicDataset, &C) -> Result<M>,
{
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if train.len() < folds || folds < 2 {
        return Err(Error::Config(format!(
            "{} rows cannot be split into {folds} folds",
            train.len()
        )));
    }
    let assignments = fold_assignments(train, folds);
    let mut means = Vec::with_capacity(grid.len());
    for config in grid {
        let mut total = 0.0;
        let mut used = 0usize;
        for fold in 0..folds {
            let fit_part = train.filter_rows(|i| assignments[i] != fold);
            let held_out = train.filter_rows(|i| assignments[i] == fold);
            if held_out.is_empty() || fit_part.is_empty() {
                continue;
            }
            let model = fit(&fit_part, config)?;
            total += snips_loss(&held_out, &model, eval_props, LossKind::Absolute)?;
            used += 1;
        }
        if used == 0 {
            return Err(Error::Config("no usable folds".into()));
        }
        means.push(total / used as f64);
    }
    Ok(means)
}

/// Select the config with the lowest mean held-out SNIPS absolute-error loss
/// over a user-stratified `folds`-fold split. `train_props` weights the
/// candidate fits (None for the naive objective); `eval_props` always drives
/// the SNIPS scoring. Ties break toward smaller dim, then smaller l2, then
/// smaller learning rate.
pub fn cross_validate(
    train: &TopicDataset,
    grid: &[TrainConfig],
    folds: usize,
    train_props: Option<&PropensityModel>,
    eval_props: &PropensityModel,
) -> Result<TrainConfig> {
    let scores = cv_mean_scores(train, grid, folds, eval_props, |part, config: &TrainConfig| {
        train_mf(part, config, train_props).map(|fit| fit.model)
    })?;
    let best = (0..grid.len())
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(grid[a].dim.cmp(&grid[b].dim))
                .then(grid[a].l2.total_cmp(&grid[b].l2))
                .then(grid[a].learning_rate.total_cmp(&grid[b].learning_rate))
        })
        .expect("non-empty grid");
    Ok(grid[best].clone())
}

/// [`cross_validate`] for the exposure model; ties break toward smaller dim,
/// then smaller ridge.
pub fn cross_validate_expomf(
    train: &TopicDataset,
    grid: &[ExpoMfConfig],
    folds: usize,
    eval_props: &PropensityModel,
) -> Result<ExpoMfConfig> {
    let scores = cv_mean_scores(train, grid, folds, eval_props, |part, config: &ExpoMfConfig| {
        train_expomf(part, config).map(|fit| fit.model)
    })?;
    let best = (0..grid.len())
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(grid[a].dim.cmp(&grid[b].dim))
                .then(grid[a].ridge.total_cmp(&grid[b].ridge))
        })
        .expect("non-empty grid");
    Ok(grid[best].clone())
}

/// Two-sided paired t-test result. `degenerate` flags zero-variance
/// differences, where the t statistic is not defined in the usual sense.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub degenerate: bool,
}

/// Two-sided paired t-test on per-seed score differences `a[i] - b[i]`.
pub fn paired_ttest(scores_a: &[f64], scores_b: &[f64]) -> Result<TTestResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::Config("score lists differ in length".into()));
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(Error::Config("need at least two paired scores".into()));
    }
    let diffs: Vec<f64> = scores_a
        .iter()
        .zip(scores_b)
        .map(|(a, b)| a - b)
        .collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;

    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t: 0.0,
                p: 1.0,
                degenerate: true,
            }
        } else {
            TTestResult {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
                degenerate: true,
            }
        });
    }

    let t = mean / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    Ok(TTestResult {
        t,
        p: special::student_t_two_sided_p(t, df),
        degenerate: false,
    })
}

/// Log-gamma, regularized incomplete beta, and the Student-t tail built on
/// them. Continued-fraction evaluation keeps the p-values accurate to well
/// below 1e-8.
pub mod special {
    /// Lanczos approximation (g = 7, 9 terms).
    pub fn ln_gamma(x: f64) -> f64 {
        #[allow(clippy::excessive_precision)]
        const COEFFS: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_571_6e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if x < 0.5 {
            // Reflection formula.
            let pi = std::f64::consts::PI;
            return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
        }
        let x = x - 1.0;
        let mut a = COEFFS[0];
        let t = x + 7.5;
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    /// Continued fraction for the incomplete beta (modified Lentz).
    fn betacf(a: f64, b: f64, x: f64) -> f64 {
        const MAX_ITER: usize = 300;
        const EPS: f64 = 1e-15;
        const FPMIN: f64 = 1e-300;

        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m = m as f64;
            let m2 = 2.0 * m;
            let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Regularized incomplete beta `I_x(a, b)`.
    pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * betacf(a, b, x) / a
        } else {
            1.0 - front * betacf(b, a, 1.0 - x) / b
        }
    }

    /// Two-sided p-value of a t statistic with `df` degrees of freedom.
    pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
        regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t))
    }
}

//! Preference-elicitation simulation: turn item-level ratings into
//! topic-level interactions by aggregating over each topic's items, and
//! estimate the observation propensities of the resulting log.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::types::{
    rating_level, IdIndex, InteractionTable, PropensityModel, TopicAssignment,
    TopicInteractionTable,
};

/// For every (user, topic) with at least one rated item in the topic, emit
/// the arithmetic mean of those item ratings, kept continuous. Users with no
/// rated item in a topic produce no row. Output is sorted by user
/// first-appearance index, then topic id.
pub fn aggregate_to_topics(
    interactions: &InteractionTable,
    topics: &TopicAssignment,
) -> Result<TopicInteractionTable> {
    let (users, _) = interactions.index_maps()?;
    // (user index, topic) -> (sum, count)
    let mut cells: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in interactions.rows() {
        let u = users.index_of(&r.user).expect("indexed above");
        let assigned = topics
            .topics_of(&r.item)
            .ok_or_else(|| Error::MissingTopic(r.item.clone()))?;
        for &t in assigned {
            let cell = cells.entry((u, t)).or_insert((0.0, 0));
            cell.0 += r.rating;
            cell.1 += 1;
        }
    }
    let mut out = TopicInteractionTable::default();
    for ((u, t), (sum, count)) in cells {
        out.push(users.id_at(u).expect("valid index"), t, sum / count as f64);
    }
    Ok(out)
}

/// The rating-stratified propensity formula:
/// `rho(r) = P(level=r | O=1) * P(O=1) / P(level=r)`.
pub fn nb_propensity(p_level_given_obs: f64, p_obs: f64, p_level: f64) -> f64 {
    p_level_given_obs * p_obs / p_level
}

fn level_distribution(table: &TopicInteractionTable, smoothing: f64) -> [f64; 5] {
    let mut counts = [smoothing; 5];
    for r in table.rows() {
        counts[rating_level(r.rating) as usize - 1] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    counts.map(|c| c / total)
}

/// Per-level propensities for a biased log, estimated against an unbiased
/// (MCAR) sample: the observed level distribution comes from the biased
/// table, the marginal level distribution from the unbiased sample with
/// add-one smoothing over the five levels, and the overall observation rate
/// is `|biased| / num_cells`.
pub fn estimate_propensities_nb(
    biased: &TopicInteractionTable,
    unbiased_sample: &TopicInteractionTable,
    num_cells: usize,
    rho_min: f64,
) -> Result<PropensityModel> {
    if biased.is_empty() || unbiased_sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    if num_cells <= biased.len() {
        return Err(Error::Config(format!(
            "num_cells {} must exceed the {} observed ratings",
            num_cells,
            biased.len()
        )));
    }
    let p_obs = biased.len() as f64 / num_cells as f64;
    let observed_levels = level_distribution(biased, 0.0);
    let marginal_levels = level_distribution(unbiased_sample, 1.0);
    let mut rho = [0.0f64; 5];
    for r in 0..5 {
        rho[r] = nb_propensity(observed_levels[r], p_obs, marginal_levels[r]);
    }
    Ok(PropensityModel::per_level(rho, rho_min))
}

/// Item-level observation propensities for a set of users and items, stored
/// densely.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPropensities {
    pub users: IdIndex,
    pub items: IdIndex,
    /// |U|×|I| row-major.
    pub rho: Vec<f64>,
}

impl PairPropensities {
    pub fn get(&self, user: usize, item: usize) -> f64 {
        self.rho[user * self.items.len() + item]
    }
}

/// Lift item-level propensities to the topic level: a topic cell is observed
/// iff at least one constituent item rating is, so
/// `rho(u,t) = 1 - prod_{i in t} (1 - rho(u,i))`. Monotone in topic
/// membership; empty topics are skipped.
pub fn lift_item_propensities_to_topics(
    item_props: &PairPropensities,
    topics: &TopicAssignment,
    rho_min: f64,
) -> Result<PropensityModel> {
    let nu = item_props.users.len();
    let nt = topics.num_topics();
    let items_by_topic = topics.items_by_topic();
    let mut rho = vec![rho_min; nu * nt];
    for (t, members) in items_by_topic.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let member_indices: Vec<usize> = members
            .iter()
            .map(|id| item_props.items.require(id))
            .collect::<Result<_>>()?;
        for u in 0..nu {
            let mut none_observed = 1.0;
            for &i in &member_indices {
                none_observed *= 1.0 - item_props.get(u, i);
            }
            rho[u * nt + t] = 1.0 - none_observed;
        }
    }
    PropensityModel::per_cell(nu, nt, rho, rho_min)
}

/// Dense observation indicators over a (user, item) grid.
#[derive(Debug, Clone)]
pub struct ObservationGrid {
    pub users: IdIndex,
    pub items: IdIndex,
    /// |U|×|I| row-major.
    pub observed: Vec<bool>,
}

impl ObservationGrid {
    pub fn get(&self, user: usize, item: usize) -> bool {
        self.observed[user * self.items.len() + item]
    }
}

/// Logistic model of observation on item covariates, shared across users.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPropensityModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub l2: f64,
}

impl LogisticPropensityModel {
    pub fn predict(&self, covariates: &[f64]) -> f64 {
        let z = self.intercept
            + self
                .weights
                .iter()
                .zip(covariates)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    /// Candidate L2 penalties; the one with the best held-out log-loss wins.
    pub l2_grid: Vec<f64>,
    pub learning_rate: f64,
    pub iterations: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub rho_min: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2_grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            learning_rate: 0.5,
            iterations: 2000,
            holdout_fraction: 0.2,
            seed: 0,
            rho_min: crate::types::DEFAULT_RHO_MIN,
        }
    }
}

fn fit_logreg_once(
    samples: &[(usize, bool)],
    covariates: &[Vec<f64>],
    dim: usize,
    l2: f64,
    learning_rate: f64,
    iterations: usize,
) -> LogisticPropensityModel {
    let mut weights = vec![0.0f64; dim];
    let mut intercept = 0.0f64;
    let n = samples.len() as f64;
    let mut grad = vec![0.0f64; dim];
    for _ in 0..iterations {
        grad.fill(0.0);
        let mut grad_b = 0.0;
        for &(item, observed) in samples {
            let x = &covariates[item];
            let z = intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let p = 1.0 / (1.0 + (-z).exp());
            let e = p - if observed { 1.0 } else { 0.0 };
            for k in 0..dim {
                grad[k] += e * x[k];
            }
            grad_b += e;
        }
        for k in 0..dim {
            // No penalty on the intercept.
            weights[k] -= learning_rate * (grad[k] / n + l2 * weights[k]);
        }
        intercept -= learning_rate * grad_b / n;
    }
    LogisticPropensityModel {
        intercept,
        weights,
        l2,
    }
}

fn log_loss(
    model: &LogisticPropensityModel,
    samples: &[(usize, bool)],
    covariates: &[Vec<f64>],
) -> f64 {
    let mut total = 0.0;
    for &(item, observed) in samples {
        let p = model.predict(&covariates[item]).clamp(1e-12, 1.0 - 1e-12);
        total += if observed { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / samples.len() as f64
}

/// Fit item-covariate logistic propensities for every (user, item) pair of
/// the grid. The covariates are per item and shared across users, so each
/// grid cell is one training sample with its item's features. The L2 penalty
/// is chosen by held-out log-loss, then the model is refit on all samples.
pub fn fit_logreg_propensities(
    grid: &ObservationGrid,
    covariates: &[Vec<f64>],
    config: &LogRegConfig,
) -> Result<(PairPropensities, LogisticPropensityModel)> {
    let nu = grid.users.len();
    let ni = grid.items.len();
    if covariates.len() != ni {
        return Err(Error::Config(format!(
            "{} covariate rows for {ni} items",
            covariates.len()
        )));
    }
    if config.l2_grid.is_empty() {
        return Err(Error::Config("empty L2 grid".into()));
    }
    let dim = covariates.first().map(Vec::len).unwrap_or(0);
    if dim == 0 || covariates.iter().any(|c| c.len() != dim) {
        return Err(Error::Config("inconsistent covariate dimensions".into()));
    }

    let mut samples: Vec<(usize, bool)> = Vec::with_capacity(nu * ni);
    for u in 0..nu {
        for i in 0..ni {
            samples.push((i, grid.get(u, i)));
        }
    }
    let positives = samples.iter().filter(|(_, o)| *o).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = StdRng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let holdout_len = ((samples.len() as f64 * config.holdout_fraction) as usize)
        .clamp(1, samples.len() - 1);
    let holdout: Vec<(usize, bool)> = order[..holdout_len].iter().map(|&i| samples[i]).collect();
    let fit_part: Vec<(usize, bool)> = order[holdout_len..].iter().map(|&i| samples[i]).collect();

    let mut best: Option<(f64, f64)> = None; // (holdout loss, l2)
    for &l2 in &config.l2_grid {
        let candidate = fit_logreg_once(
            &fit_part,
            covariates,
            dim,
            l2,
            config.learning_rate,
            config.iterations,
        );
        let loss = log_loss(&candidate, &holdout, covariates);
        if best.map(|(b, _)| loss < b).unwrap_or(true) {
            best = Some((loss, l2));
        }
    }
    let (_, best_l2) = best.expect("non-empty grid");
    let model = fit_logreg_once(
        &samples,
        covariates,
        dim,
        best_l2,
        config.learning_rate,
        config.iterations,
    );

    let per_item: Vec<f64> = covariates
        .iter()
        .map(|x| model.predict(x).clamp(config.rho_min, 1.0))
        .collect();
    let mut rho = Vec::with_capacity(nu * ni);
    for _u in 0..nu {
        rho.extend_from_slice(&per_item);
    }
    Ok((
        PairPropensities {
            users: grid.users.clone(),
            items: grid.items.clone(),
            rho,
        },
        model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn topics_of(pairs: &[(&str, &[usize])]) -> TopicAssignment {
        let mut by_item = BTreeMap::new();
        for (item, ts) in pairs {
            by_item.insert(item.to_string(), ts.iter().copied().collect::<BTreeSet<_>>());
        }
        let num_topics = pairs
            .iter()
            .flat_map(|(_, ts)| ts.iter())
            .max()
            .map(|m| m + 1)
            .unwrap();
        TopicAssignment::new(by_item, num_topics).unwrap()
    }

    #[test]
    fn aggregate_single_item_passes_through() {
        let mut t = InteractionTable::default();
        t.push("u", "i", 4.0);
        let topics = topics_of(&[("i", &[0])]);
        let out = aggregate_to_topics(&t, &topics).unwrap();
        assert_eq!(out.rows().len(), 1);
        assert_eq!(out.rows()[0].rating, 4.0);
        assert_eq!(out.rows()[0].topic, 0);
    }

    #[test]
    fn aggregate_means_item_ratings() {
        let mut t = InteractionTable::default();
        t.push("u", "a", 4.0);
        t.push("u", "b", 5.0);
        let topics = topics_of(&[("a", &[0]), ("b", &[0])]);
        let out = aggregate_to_topics(&t, &topics).unwrap();
        assert_eq!(out.rows().len(), 1);
        assert!((out.rows()[0].rating - 4.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_multi_topic_items_contribute_everywhere() {
        let mut t = InteractionTable::default();
        t.push("u", "a", 3.0);
        let topics = topics_of(&[("a", &[0, 1])]);
        let out = aggregate_to_topics(&t, &topics).unwrap();
        assert_eq!(out.rows().len(), 2);
        assert!(out.rows().iter().all(|r| r.rating == 3.0));
    }

    #[test]
    fn aggregate_missing_topic_is_an_error() {
        let mut t = InteractionTable::default();
        t.push("u", "a", 3.0);
        t.push("u", "mystery", 2.0);
        let topics = topics_of(&[("a", &[0])]);
        match aggregate_to_topics(&t, &topics) {
            Err(Error::MissingTopic(item)) => assert_eq!(item, "mystery"),
            other => panic!("expected MissingTopic, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_row_count_matches_multiplicity() {
        // Sum over topics of per-topic rating counts equals sum over items
        // of rating count x topic multiplicity.
        let mut t = InteractionTable::default();
        t.push("u1", "a", 3.0);
        t.push("u1", "b", 4.0);
        t.push("u2", "a", 5.0);
        let topics = topics_of(&[("a", &[0, 1]), ("b", &[1])]);
        let out = aggregate_to_topics(&t, &topics).unwrap();
        let mut per_topic_counts = [0usize; 2];
        for r in t.rows() {
            for &tp in topics.topics_of(&r.item).unwrap() {
                per_topic_counts[tp] += 1;
            }
        }
        // u1 covers topics {0,1}, u2 covers {0,1} -> 4 rows; counts 2 + 3.
        assert_eq!(out.rows().len(), 4);
        assert_eq!(per_topic_counts.iter().sum::<usize>(), 5);
    }

    #[test]
    fn nb_propensity_hand_value() {
        assert!((nb_propensity(0.5, 0.1, 0.2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nb_identical_distributions_give_constant() {
        // Same level mix in both tables; rho(r) must equal P(O=1) for all r
        // up to the smoothing on the marginal.
        let mut biased = TopicInteractionTable::default();
        let mut unbiased = TopicInteractionTable::default();
        for (i, lvl) in (1..=5).cycle().take(500).enumerate() {
            biased.push(format!("u{i}"), 0, f64::from(lvl));
            unbiased.push(format!("v{i}"), 0, f64::from(lvl));
        }
        let num_cells = 5000;
        let props = estimate_propensities_nb(&biased, &unbiased, num_cells, 1e-9).unwrap();
        let p_obs = 500.0 / 5000.0;
        for lvl in 1..=5u8 {
            let got = props.rho(0, 0, lvl).unwrap();
            assert!(
                (got - p_obs).abs() < 1e-3,
                "level {lvl}: {got} vs {p_obs}"
            );
        }
    }

    #[test]
    fn nb_matches_independent_recount() {
        // Independent oracle: recompute the estimator from raw counts.
        let mut biased = TopicInteractionTable::default();
        let mut unbiased = TopicInteractionTable::default();
        let biased_levels = [5.0, 5.0, 5.0, 4.0, 3.0];
        let unbiased_levels = [1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 2.0, 1.0];
        for (i, &l) in biased_levels.iter().enumerate() {
            biased.push(format!("u{i}"), 0, l);
        }
        for (i, &l) in unbiased_levels.iter().enumerate() {
            unbiased.push(format!("v{i}"), 0, l);
        }
        let num_cells = 100;
        let props = estimate_propensities_nb(&biased, &unbiased, num_cells, 1e-9).unwrap();

        let n_b = biased_levels.len() as f64;
        let n_u = unbiased_levels.len() as f64;
        for lvl in 1..=5u8 {
            let p_obs_level = biased_levels
                .iter()
                .filter(|&&x| x == f64::from(lvl))
                .count() as f64
                / n_b;
            let p_level = (unbiased_levels
                .iter()
                .filter(|&&x| x == f64::from(lvl))
                .count() as f64
                + 1.0)
                / (n_u + 5.0);
            let expect = (p_obs_level * (n_b / 100.0) / p_level).clamp(1e-9, 1.0);
            let got = props.rho(0, 0, lvl).unwrap();
            assert!((got - expect).abs() < 1e-12, "level {lvl}");
        }
    }

    #[test]
    fn nb_clips_to_floor() {
        let mut biased = TopicInteractionTable::default();
        let mut unbiased = TopicInteractionTable::default();
        // Level 1 never observed -> raw rho(1) = 0 -> floored.
        for i in 0..50 {
            biased.push(format!("u{i}"), 0, 5.0);
            unbiased.push(format!("v{i}"), 0, f64::from(i % 5 + 1));
        }
        let props = estimate_propensities_nb(&biased, &unbiased, 5000, 0.01).unwrap();
        assert_eq!(props.rho(0, 0, 1).unwrap(), 0.01);
    }

    #[test]
    fn nb_total_mass_identity_pre_clipping() {
        // sum_r rho(r) * P(level=r) = P(O=1), checked with a floor small
        // enough that clipping never binds.
        let mut biased = TopicInteractionTable::default();
        let mut unbiased = TopicInteractionTable::default();
        let mut rng = StdRng::seed_from_u64(3);
        for i in 0..400 {
            biased.push(format!("u{i}"), 0, f64::from(rng.random_range(3..=5)));
        }
        for i in 0..600 {
            unbiased.push(format!("v{i}"), 0, f64::from(rng.random_range(1..=5)));
        }
        let num_cells = 20_000;
        let props = estimate_propensities_nb(&biased, &unbiased, num_cells, 1e-15).unwrap();
        let marginal = level_distribution(&unbiased, 1.0);
        let mut mass = 0.0;
        for lvl in 1..=5u8 {
            mass += props.rho(0, 0, lvl).unwrap() * marginal[lvl as usize - 1];
        }
        let p_obs = 400.0 / num_cells as f64;
        assert!((mass - p_obs).abs() < 1e-9, "{mass} vs {p_obs}");
    }

    #[test]
    fn nb_rejects_bad_cell_count() {
        let mut biased = TopicInteractionTable::default();
        let mut unbiased = TopicInteractionTable::default();
        for i in 0..10 {
            biased.push(format!("u{i}"), 0, 4.0);
            unbiased.push(format!("v{i}"), 0, 3.0);
        }
        assert!(matches!(
            estimate_propensities_nb(&biased, &unbiased, 10, 0.01),
            Err(Error::Config(_))
        ));
    }

    fn pair_props(items: &[&str], rho_per_item: &[f64]) -> PairPropensities {
        PairPropensities {
            users: IdIndex::from_ids(["u0"]),
            items: IdIndex::from_ids(items.iter().copied()),
            rho: rho_per_item.to_vec(),
        }
    }

    #[test]
    fn lift_singleton_topic_passes_through() {
        let props = pair_props(&["a"], &[0.3]);
        let topics = topics_of(&[("a", &[0])]);
        let lifted = lift_item_propensities_to_topics(&props, &topics, 1e-6).unwrap();
        assert!((lifted.rho(0, 0, 1).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lift_two_items_hand_value() {
        let props = pair_props(&["a", "b"], &[0.5, 0.5]);
        let topics = topics_of(&[("a", &[0]), ("b", &[0])]);
        let lifted = lift_item_propensities_to_topics(&props, &topics, 1e-6).unwrap();
        assert!((lifted.rho(0, 0, 1).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn lift_certain_item_absorbs() {
        let props = pair_props(&["a", "b"], &[1.0, 0.2]);
        let topics = topics_of(&[("a", &[0]), ("b", &[0])]);
        let lifted = lift_item_propensities_to_topics(&props, &topics, 1e-6).unwrap();
        assert_eq!(lifted.rho(0, 0, 1).unwrap(), 1.0);
    }

    #[test]
    fn lift_monotone_in_membership() {
        // Adding an item to a topic never decreases the topic propensity.
        let props = pair_props(&["a", "b", "c"], &[0.4, 0.25, 0.6]);
        let smaller = topics_of(&[("a", &[0]), ("b", &[0]), ("c", &[1])]);
        let larger = topics_of(&[("a", &[0]), ("b", &[0]), ("c", &[0, 1])]);
        let lifted_small = lift_item_propensities_to_topics(&props, &smaller, 1e-6).unwrap();
        let lifted_large = lift_item_propensities_to_topics(&props, &larger, 1e-6).unwrap();
        assert!(lifted_large.rho(0, 0, 1).unwrap() >= lifted_small.rho(0, 0, 1).unwrap());
    }

    fn grid_from(users: usize, observed_items: &[Vec<bool>]) -> ObservationGrid {
        let ni = observed_items[0].len();
        let user_ids: Vec<String> = (0..users).map(|u| format!("u{u}")).collect();
        let item_ids: Vec<String> = (0..ni).map(|i| format!("i{i}")).collect();
        let mut observed = Vec::with_capacity(users * ni);
        for row in observed_items {
            observed.extend_from_slice(row);
        }
        ObservationGrid {
            users: IdIndex::from_ids(user_ids.iter().map(String::as_str)),
            items: IdIndex::from_ids(item_ids.iter().map(String::as_str)),
            observed,
        }
    }

    #[test]
    fn logreg_perfect_separation_hits_clipped_bounds() {
        // One binary covariate exactly matching the labels.
        let per_user: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let rows: Vec<Vec<bool>> = (0..30).map(|_| per_user.clone()).collect();
        let grid = grid_from(30, &rows);
        let covariates: Vec<Vec<f64>> = per_user
            .iter()
            .map(|&o| vec![if o { 1.0 } else { 0.0 }])
            .collect();
        let config = LogRegConfig {
            iterations: 4000,
            ..LogRegConfig::default()
        };
        let (props, _) = fit_logreg_propensities(&grid, &covariates, &config).unwrap();
        for (i, &observed) in per_user.iter().enumerate() {
            let rho = props.get(0, i);
            if observed {
                assert!(rho >= 0.95, "observed item rho {rho}");
            } else {
                assert_eq!(rho, config.rho_min, "unobserved item rho {rho}");
            }
        }
    }

    #[test]
    fn logreg_zero_weights_predict_base_rate() {
        let model = LogisticPropensityModel {
            intercept: (0.3f64 / 0.7).ln(),
            weights: vec![0.0, 0.0],
            l2: 0.0,
        };
        assert!((model.predict(&[1.7, -0.4]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn logreg_recovers_known_ground_truth() {
        // Simulation oracle: weights [1.5, -0.5], intercept -2, 10k samples.
        let mut rng = StdRng::seed_from_u64(7);
        let n = 10_000;
        let covariates: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                vec![
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]
            })
            .collect();
        let observed: Vec<bool> = covariates
            .iter()
            .map(|x| {
                let z = 1.5 * x[0] - 0.5 * x[1] - 2.0;
                rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())
            })
            .collect();
        let grid = grid_from(1, &[observed]);
        let config = LogRegConfig {
            l2_grid: vec![1e-6, 1e-4],
            iterations: 3000,
            learning_rate: 1.0,
            ..LogRegConfig::default()
        };
        let (_, model) = fit_logreg_propensities(&grid, &covariates, &config).unwrap();
        assert!((model.weights[0] - 1.5).abs() <= 0.15, "{:?}", model.weights);
        assert!((model.weights[1] + 0.5).abs() <= 0.15, "{:?}", model.weights);
        assert!((model.intercept + 2.0).abs() <= 0.15, "{}", model.intercept);
    }

    #[test]
    fn logreg_degenerate_labels() {
        let rows = vec![vec![true, true], vec![true, true]];
        let grid = grid_from(2, &rows);
        let covariates = vec![vec![1.0], vec![0.0]];
        assert!(matches!(
            fit_logreg_propensities(&grid, &covariates, &LogRegConfig::default()),
            Err(Error::DegenerateLabels)
        ));
    }
}

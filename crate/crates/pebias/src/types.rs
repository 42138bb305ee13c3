//! Core data model: interaction tables, topic assignments, propensity models,
//! and the latent-factor rating model.
//!
//! Ids are opaque strings at the boundary; all numerics run on dense 0-based
//! indices produced by [`IdIndex`]. Tables are immutable once built and safe
//! to share read-only across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Inclusive rating scale.
pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 5.0;

/// Default propensity floor; caps inverse-propensity weights at 100.
pub const DEFAULT_RHO_MIN: f64 = 0.01;

/// Nearest integer level in {1..5}, rounding half away from zero.
///
/// Used only where stratification needs a discrete level; ratings themselves
/// stay continuous.
pub fn rating_level(rating: f64) -> u8 {
    rating.round().clamp(RATING_MIN, RATING_MAX) as u8
}

/// Bijection between opaque string ids and dense 0-based indices, in
/// first-appearance order. Rebuilding from identical input yields an
/// identical map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdIndex {
    forward: HashMap<String, usize>,
    ids: Vec<String>,
}

impl IdIndex {
    pub fn from_ids<'a, I>(ids: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut forward = HashMap::new();
        let mut ordered = Vec::new();
        for id in ids {
            if !forward.contains_key(id) {
                forward.insert(id.to_owned(), ordered.len());
                ordered.push(id.to_owned());
            }
        }
        IdIndex {
            forward,
            ids: ordered,
        }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.forward.get(id).copied()
    }

    /// Index of `id`, or [`Error::UnknownId`].
    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn id_at(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }
}

/// One `(user, item, rating)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

/// Raw user-item rating triples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionTable {
    rows: Vec<Interaction>,
}

/// One `(user, topic, rating)` triple; the presence of a row is the
/// observation indicator for that user-topic cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicInteraction {
    pub user: String,
    pub topic: usize,
    pub rating: f64,
}

/// Observed user-topic ratings. Topic ids are dense 0-based integers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopicInteractionTable {
    rows: Vec<TopicInteraction>,
}

/// An invariant violation found by [`InteractionTable::validate`] or
/// [`TopicInteractionTable::validate`]. Row numbers are 0-based positions in
/// the triple list.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RatingOutOfRange { row: usize, value: f64 },
    DuplicatePair { row: usize, user: String, entity: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RatingOutOfRange { row, value } => {
                write!(f, "rating out of range, row {row} (value {value})")
            }
            Violation::DuplicatePair { row, user, entity } => {
                write!(f, "duplicate pair ({user}, {entity}), row {row}")
            }
        }
    }
}

impl InteractionTable {
    pub fn new(rows: Vec<Interaction>) -> Self {
        InteractionTable { rows }
    }

    pub fn push(&mut self, user: impl Into<String>, item: impl Into<String>, rating: f64) {
        self.rows.push(Interaction {
            user: user.into(),
            item: item.into(),
            rating,
        });
    }

    pub fn rows(&self) -> &[Interaction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Every range and duplicate violation, with row numbers. An empty
    /// result means the table satisfies its invariants.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen: HashSet<(&str, &str)> = HashSet::new();
        for (row, r) in self.rows.iter().enumerate() {
            if !(RATING_MIN..=RATING_MAX).contains(&r.rating) || !r.rating.is_finite() {
                violations.push(Violation::RatingOutOfRange {
                    row,
                    value: r.rating,
                });
            }
            if !seen.insert((r.user.as_str(), r.item.as_str())) {
                violations.push(Violation::DuplicatePair {
                    row,
                    user: r.user.clone(),
                    entity: r.item.clone(),
                });
            }
        }
        violations
    }

    /// Dense index maps for users and items, in first-appearance order.
    pub fn index_maps(&self) -> Result<(IdIndex, IdIndex)> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let users = IdIndex::from_ids(self.rows.iter().map(|r| r.user.as_str()));
        let items = IdIndex::from_ids(self.rows.iter().map(|r| r.item.as_str()));
        Ok((users, items))
    }
}

impl TopicInteractionTable {
    pub fn new(rows: Vec<TopicInteraction>) -> Self {
        TopicInteractionTable { rows }
    }

    pub fn push(&mut self, user: impl Into<String>, topic: usize, rating: f64) {
        self.rows.push(TopicInteraction {
            user: user.into(),
            topic,
            rating,
        });
    }

    pub fn rows(&self) -> &[TopicInteraction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut seen: HashSet<(&str, usize)> = HashSet::new();
        for (row, r) in self.rows.iter().enumerate() {
            if !(RATING_MIN..=RATING_MAX).contains(&r.rating) || !r.rating.is_finite() {
                violations.push(Violation::RatingOutOfRange {
                    row,
                    value: r.rating,
                });
            }
            if !seen.insert((r.user.as_str(), r.topic)) {
                violations.push(Violation::DuplicatePair {
                    row,
                    user: r.user.clone(),
                    entity: r.topic.to_string(),
                });
            }
        }
        violations
    }

    /// User index in first-appearance order. Topic ids are already dense.
    pub fn user_index(&self) -> Result<IdIndex> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(IdIndex::from_ids(self.rows.iter().map(|r| r.user.as_str())))
    }

    /// Index maps in first-appearance order, topics keyed by their decimal
    /// form. Useful for interchange ordering; numeric code addresses topics
    /// by their already-dense ids instead.
    pub fn index_maps(&self) -> Result<(IdIndex, IdIndex)> {
        let users = self.user_index()?;
        let topic_strings: Vec<String> = self.rows.iter().map(|r| r.topic.to_string()).collect();
        let topics = IdIndex::from_ids(topic_strings.iter().map(String::as_str));
        Ok((users, topics))
    }

    /// Smallest topic count covering every row, i.e. max topic id + 1.
    pub fn min_num_topics(&self) -> usize {
        self.rows.iter().map(|r| r.topic + 1).max().unwrap_or(0)
    }

    /// Resolve string user ids against `users` and pin the topic universe,
    /// producing the dense form consumed by training and evaluation.
    pub fn to_dataset(&self, users: &IdIndex, num_topics: usize) -> Result<TopicDataset> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let user = users.require(&r.user)?;
            if r.topic >= num_topics {
                return Err(Error::Validation(format!(
                    "topic id {} outside universe of {} topics",
                    r.topic, num_topics
                )));
            }
            rows.push(TopicObservation {
                user,
                topic: r.topic,
                rating: r.rating,
                level: rating_level(r.rating),
            });
        }
        Ok(TopicDataset {
            num_users: users.len(),
            num_topics,
            rows,
        })
    }
}

/// A dense-indexed observed user-topic rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicObservation {
    pub user: usize,
    pub topic: usize,
    pub rating: f64,
    pub level: u8,
}

/// A [`TopicInteractionTable`] resolved against a fixed (user, topic)
/// universe; the form every estimator works on.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDataset {
    pub num_users: usize,
    pub num_topics: usize,
    rows: Vec<TopicObservation>,
}

impl TopicDataset {
    pub fn from_rows(num_users: usize, num_topics: usize, rows: Vec<TopicObservation>) -> Self {
        TopicDataset {
            num_users,
            num_topics,
            rows,
        }
    }

    pub fn rows(&self) -> &[TopicObservation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// |U|·|T| of the universe this dataset is resolved against.
    pub fn num_cells(&self) -> usize {
        self.num_users * self.num_topics
    }

    /// Sub-dataset keeping rows whose position satisfies `keep`; universe
    /// unchanged.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> TopicDataset {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, r)| *r)
            .collect();
        TopicDataset {
            num_users: self.num_users,
            num_topics: self.num_topics,
            rows,
        }
    }

    pub fn mean_rating(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.rating).sum::<f64>() / self.rows.len() as f64
    }
}

/// Item → non-empty set of topic ids, topic ids dense in `0..num_topics`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAssignment {
    by_item: BTreeMap<String, BTreeSet<usize>>,
    num_topics: usize,
}

impl TopicAssignment {
    /// Build and check the invariants: no empty topic set, every topic id in
    /// range, every topic id assigned to at least one item.
    pub fn new(by_item: BTreeMap<String, BTreeSet<usize>>, num_topics: usize) -> Result<Self> {
        if num_topics == 0 || by_item.is_empty() {
            return Err(Error::Validation(
                "topic assignment needs at least one item and one topic".into(),
            ));
        }
        let mut covered = vec![false; num_topics];
        for (item, topics) in &by_item {
            if topics.is_empty() {
                return Err(Error::Validation(format!("item {item:?} has no topics")));
            }
            for &t in topics {
                if t >= num_topics {
                    return Err(Error::Validation(format!(
                        "item {item:?} assigned to topic {t} >= {num_topics}"
                    )));
                }
                covered[t] = true;
            }
        }
        if let Some(t) = covered.iter().position(|c| !c) {
            return Err(Error::Validation(format!("topic {t} has no items")));
        }
        Ok(TopicAssignment {
            by_item,
            num_topics,
        })
    }

    /// Build from raw (item, topic) pairs; topic ids are re-densified in
    /// ascending numeric order so gaps in the input collapse.
    pub fn from_pairs(pairs: &[(String, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let used: BTreeSet<usize> = pairs.iter().map(|(_, t)| *t).collect();
        let remap: BTreeMap<usize, usize> = used
            .iter()
            .enumerate()
            .map(|(dense, &orig)| (orig, dense))
            .collect();
        let mut by_item: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (item, topic) in pairs {
            by_item
                .entry(item.clone())
                .or_default()
                .insert(remap[topic]);
        }
        TopicAssignment::new(by_item, used.len())
    }

    pub fn topics_of(&self, item: &str) -> Option<&BTreeSet<usize>> {
        self.by_item.get(item)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_items(&self) -> usize {
        self.by_item.len()
    }

    pub fn items(&self) -> impl Iterator<Item = (&str, &BTreeSet<usize>)> {
        self.by_item.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Items of each topic, indexed by topic id.
    pub fn items_by_topic(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.num_topics];
        for (item, topics) in &self.by_item {
            for &t in topics {
                out[t].push(item.as_str());
            }
        }
        out
    }
}

/// Dense |U|×|T| ground-truth rating matrix; synthetic settings only.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPreferenceMatrix {
    num_users: usize,
    num_topics: usize,
    values: Vec<f64>,
}

impl FullPreferenceMatrix {
    pub fn new(num_users: usize, num_topics: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_users * num_topics {
            return Err(Error::Validation(format!(
                "expected {} values, got {}",
                num_users * num_topics,
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(RATING_MIN..=RATING_MAX).contains(*v))
        {
            return Err(Error::Validation(format!("rating {v} out of [1,5]")));
        }
        Ok(FullPreferenceMatrix {
            num_users,
            num_topics,
            values,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, user: usize, topic: usize) -> f64 {
        self.values[user * self.num_topics + topic]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Observation propensities ρ in `[rho_min, 1]`: a single constant, one value
/// per discrete rating level, or a dense per-cell matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    Constant(f64),
    PerLevel([f64; 5]),
    PerCell {
        num_users: usize,
        num_topics: usize,
        rho: Vec<f64>,
    },
}

fn clip_rho(rho: f64, rho_min: f64) -> f64 {
    rho.clamp(rho_min, 1.0)
}

impl PropensityModel {
    pub fn constant(rho: f64, rho_min: f64) -> Self {
        PropensityModel::Constant(clip_rho(rho, rho_min))
    }

    pub fn per_level(values: [f64; 5], rho_min: f64) -> Self {
        PropensityModel::PerLevel(values.map(|v| clip_rho(v, rho_min)))
    }

    pub fn per_cell(num_users: usize, num_topics: usize, rho: Vec<f64>, rho_min: f64) -> Result<Self> {
        if rho.len() != num_users * num_topics {
            return Err(Error::Validation(format!(
                "propensity matrix needs {} cells, got {}",
                num_users * num_topics,
                rho.len()
            )));
        }
        Ok(PropensityModel::PerCell {
            num_users,
            num_topics,
            rho: rho.into_iter().map(|v| clip_rho(v, rho_min)).collect(),
        })
    }

    /// Propensity for an observed cell. `level` is the discrete rating level
    /// used by the per-level form.
    pub fn rho(&self, user: usize, topic: usize, level: u8) -> Result<f64> {
        match self {
            PropensityModel::Constant(r) => Ok(*r),
            PropensityModel::PerLevel(values) => {
                if !(1..=5).contains(&level) {
                    return Err(Error::MissingPropensity { user, topic });
                }
                Ok(values[level as usize - 1])
            }
            PropensityModel::PerCell {
                num_users,
                num_topics,
                rho,
            } => {
                if user >= *num_users || topic >= *num_topics {
                    return Err(Error::MissingPropensity { user, topic });
                }
                Ok(rho[user * num_topics + topic])
            }
        }
    }
}

/// Anything that predicts a rating for a dense (user, topic) pair.
pub trait Predictor {
    fn predict(&self, user: usize, topic: usize) -> f64;

    /// Prediction clamped to the rating scale; evaluation only.
    fn predict_clamped(&self, user: usize, topic: usize) -> f64 {
        self.predict(user, topic).clamp(RATING_MIN, RATING_MAX)
    }
}

/// Biased matrix-factorization model:
/// `ŷ(u,t) = P_u · Q_t + b_u + b_t + μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub num_users: usize,
    pub num_topics: usize,
    pub dim: usize,
    /// |U|×d, row-major.
    pub user_factors: Vec<f64>,
    /// |T|×d, row-major.
    pub topic_factors: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub topic_bias: Vec<f64>,
    pub global_mean: f64,
}

impl FactorModel {
    pub fn zeros(num_users: usize, num_topics: usize, dim: usize) -> Self {
        FactorModel {
            num_users,
            num_topics,
            dim,
            user_factors: vec![0.0; num_users * dim],
            topic_factors: vec![0.0; num_topics * dim],
            user_bias: vec![0.0; num_users],
            topic_bias: vec![0.0; num_topics],
            global_mean: 0.0,
        }
    }

    pub fn user_row(&self, user: usize) -> &[f64] {
        &self.user_factors[user * self.dim..(user + 1) * self.dim]
    }

    pub fn topic_row(&self, topic: usize) -> &[f64] {
        &self.topic_factors[topic * self.dim..(topic + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.user_factors.iter().all(|v| v.is_finite())
            && self.topic_factors.iter().all(|v| v.is_finite())
            && self.user_bias.iter().all(|v| v.is_finite())
            && self.topic_bias.iter().all(|v| v.is_finite())
            && self.global_mean.is_finite()
    }
}

impl Predictor for FactorModel {
    fn predict(&self, user: usize, topic: usize) -> f64 {
        let p = self.user_row(user);
        let q = self.topic_row(topic);
        let mut dot = 0.0;
        for k in 0..self.dim {
            dot += p[k] * q[k];
        }
        dot + self.user_bias[user] + self.topic_bias[topic] + self.global_mean
    }
}

//! End-to-end experiment pipelines: configuration, seeded sweeps over bias
//! levels or cluster counts, per-cell isolation, and results aggregation
//! with paired significance tests against the naive baseline.
//!
//! A run is a grid of (setting, seed) cells. Each cell derives every stage
//! seed from the master seed via [`crate::seeding::resolve_seed`], so cells
//! are independent and the summary is byte-identical regardless of worker
//! count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::expomf::{train_expomf, ExpoMfConfig};
use crate::estimators::losses::LossKind;
use crate::estimators::mf::{train_mf, TrainConfig};
use crate::eval::{cross_validate, cross_validate_expomf, ndcg_at_k, paired_ttest, rating_metrics};
use crate::io;
use crate::pe::{aggregate_to_topics, estimate_propensities_nb};
use crate::seeding::resolve_seed;
use crate::synth::{generate_dataset, synth_user_id, SynthConfig};
use crate::topics::{
    assign_topics, fit_gmm, generate_walks, train_embeddings, BipartiteGraph, GmmConfig,
    SkipGramConfig,
};
use crate::types::{
    IdIndex, InteractionTable, PropensityModel, TopicAssignment, TopicDataset,
    DEFAULT_RHO_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    FullySynthetic,
    SemiSynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Mf,
    ExpoMf,
    MfIps,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mf" => Ok(Method::Mf),
            "expomf" => Ok(Method::ExpoMf),
            "mf-ips" | "mfips" => Ok(Method::MfIps),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mf => "MF",
            Method::ExpoMf => "ExpoMF",
            Method::MfIps => "MF-IPS",
        })
    }
}

/// The experiment's sweep axis: positivity-bias mixing weights for the
/// fully-synthetic mode, cluster counts for the semi-synthetic one.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Alphas(Vec<f64>),
    Clusters(Vec<usize>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Alphas(v) => v.len(),
            SweepAxis::Clusters(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, index: usize) -> String {
        match self {
            SweepAxis::Alphas(v) => format!("alpha={}", v[index]),
            SweepAxis::Clusters(v) => format!("clusters={}", v[index]),
        }
    }
}

/// Knobs of the synthetic-topic pipeline used in semi-synthetic mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDiscoveryConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub embedding_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
}

impl Default for TopicDiscoveryConfig {
    fn default() -> Self {
        TopicDiscoveryConfig {
            walks_per_node: 10,
            walk_length: 40,
            embedding_dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            gmm_max_iters: 100,
            gmm_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub sweep: SweepAxis,
    pub methods: Vec<Method>,
    pub num_seeds: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub folds: usize,
    pub ndcg_k: usize,
    pub rho_min: f64,
    /// Template for fully-synthetic generation; alpha and seed are filled
    /// per cell.
    pub synth: SynthConfig,
    /// Hyperparameter grid for MF and MF-IPS; seeds are filled per cell.
    pub mf_grid: Vec<TrainConfig>,
    pub expomf_grid: Vec<ExpoMfConfig>,
    pub yahoo_train: Option<PathBuf>,
    pub yahoo_test: Option<PathBuf>,
    pub graph_fraction: f64,
    pub discovery: TopicDiscoveryConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep axis is empty".into()));
        }
        if self.num_seeds < 2 {
            return Err(Error::Config(
                "num_seeds must be >= 2 for the paired t-test".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.mf_grid.is_empty() || self.expomf_grid.is_empty() {
            return Err(Error::Config("hyperparameter grids must be non-empty".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        match (self.mode, &self.sweep) {
            (ExperimentMode::FullySynthetic, SweepAxis::Alphas(_)) => {}
            (ExperimentMode::SemiSynthetic, SweepAxis::Clusters(_)) => {}
            _ => {
                return Err(Error::Config(
                    "sweep axis does not match mode (alphas for fully-synthetic, \
                     clusters for semi-synthetic)"
                        .into(),
                ))
            }
        }
        if self.mode == ExperimentMode::SemiSynthetic
            && (self.yahoo_train.is_none() || self.yahoo_test.is_none())
        {
            return Err(Error::Config(
                "semi-synthetic mode needs yahoo_train and yahoo_test paths".into(),
            ));
        }
        Ok(())
    }
}

/// Metric triple of one trained method on one cell's unbiased test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodScores {
    pub method: Method,
    pub mae: f64,
    pub mse: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone)]
struct CellOutcome {
    setting_index: usize,
    seed_index: usize,
    scores: Vec<MethodScores>,
    error: Option<String>,
}

/// One aggregated summary row, means over seeds plus per-metric p-values
/// against the MF baseline (None on the baseline itself).
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub setting_label: String,
    pub method: Method,
    pub mae: f64,
    pub mse: f64,
    pub ndcg: f64,
    pub p_mae: Option<f64>,
    pub p_mse: Option<f64>,
    pub p_ndcg: Option<f64>,
    pub seeds_used: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<SummaryRow>,
    /// (setting label, seed index, message) for every failed cell.
    pub errors: Vec<(String, usize, String)>,
    /// Per-seed scores keyed by (setting index, method), ordered by seed.
    pub per_seed: BTreeMap<(usize, Method), Vec<(usize, MethodScores)>>,
    pub summary_tsv: String,
    pub summary_table: String,
}

// MF and MF-IPS share one training stream per cell: identical
// initialization and shuffles isolate the propensity weighting in the
// paired per-seed comparison.
fn mf_label(method: Method) -> &'static str {
    match method {
        Method::Mf | Method::MfIps => "train-mf",
        Method::ExpoMf => "train-expomf",
    }
}

/// Train one method end to end inside a cell: cross-validate if the grid has
/// more than one candidate, fit on the full training split, and evaluate on
/// the unbiased test split.
#[allow(clippy::too_many_arguments)]
fn run_method(
    config: &ExperimentConfig,
    method: Method,
    train: &TopicDataset,
    test: &TopicDataset,
    props: &PropensityModel,
    setting_index: usize,
    seed_index: usize,
) -> Result<MethodScores> {
    let stage_seed = resolve_seed(
        config.master_seed,
        setting_index,
        seed_index,
        mf_label(method),
    );
    let (mae, mse, ndcg) = match method {
        Method::Mf | Method::MfIps => {
            let train_props = match method {
                Method::MfIps => Some(props),
                _ => None,
            };
            let grid: Vec<TrainConfig> = config
                .mf_grid
                .iter()
                .map(|c| TrainConfig {
                    seed: stage_seed,
                    ..c.clone()
                })
                .collect();
            let best = if grid.len() == 1 {
                grid[0].clone()
            } else {
                cross_validate(train, &grid, config.folds, train_props, props)?
            };
            let fit = train_mf(train, &best, train_props)?;
            let (mae, mse) = rating_metrics(test, &fit.model)?;
            let ndcg = ndcg_at_k(test, &fit.model, config.ndcg_k)?;
            (mae, mse, ndcg)
        }
        Method::ExpoMf => {
            let grid: Vec<ExpoMfConfig> = config
                .expomf_grid
                .iter()
                .map(|c| ExpoMfConfig {
                    seed: stage_seed,
                    ..c.clone()
                })
                .collect();
            let best = if grid.len() == 1 {
                grid[0].clone()
            } else {
                cross_validate_expomf(train, &grid, config.folds, props)?
            };
            let fit = train_expomf(train, &best)?;
            let (mae, mse) = rating_metrics(test, &fit.model)?;
            let ndcg = ndcg_at_k(test, &fit.model, config.ndcg_k)?;
            (mae, mse, ndcg)
        }
    };
    Ok(MethodScores {
        method,
        mae,
        mse,
        ndcg,
    })
}

fn run_synth_cell(
    config: &ExperimentConfig,
    alpha: f64,
    setting_index: usize,
    seed_index: usize,
) -> Result<Vec<MethodScores>> {
    let synth = SynthConfig {
        alpha,
        seed: resolve_seed(config.master_seed, setting_index, seed_index, "synth"),
        rho_min: config.rho_min,
        ..config.synth.clone()
    };
    let ds = generate_dataset(&synth)?;
    let ids: Vec<String> = (0..synth.num_users).map(synth_user_id).collect();
    let users = IdIndex::from_ids(ids.iter().map(String::as_str));
    let train = ds.train.to_dataset(&users, synth.num_topics)?;
    let test = ds.test.to_dataset(&users, synth.num_topics)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput);
    }
    config
        .methods
        .iter()
        .map(|&m| {
            run_method(
                config,
                m,
                &train,
                &test,
                &ds.truth_propensities,
                setting_index,
                seed_index,
            )
        })
        .collect()
}

/// Keep only interactions whose item has a topic; returns the kept table and
/// the number of dropped rows.
fn filter_to_assigned(
    table: &InteractionTable,
    topics: &TopicAssignment,
) -> (InteractionTable, usize) {
    let mut kept = InteractionTable::default();
    let mut dropped = 0usize;
    for r in table.rows() {
        if topics.topics_of(&r.item).is_some() {
            kept.push(r.user.clone(), r.item.clone(), r.rating);
        } else {
            dropped += 1;
        }
    }
    (kept, dropped)
}

fn run_yahoo_cell(
    config: &ExperimentConfig,
    yahoo: &io::YahooData,
    clusters: usize,
    setting_index: usize,
    seed_index: usize,
) -> Result<Vec<MethodScores>> {
    // Reserve a fraction of the unbiased test rows for graph building and
    // propensity estimation; the rest is the evaluation split.
    if yahoo.test.len() < 2 {
        return Err(Error::Config(
            "unbiased test set too small to split for graph building".into(),
        ));
    }
    let mut order: Vec<usize> = (0..yahoo.test.len()).collect();
    let split_seed = resolve_seed(config.master_seed, setting_index, seed_index, "graph-split");
    order.shuffle(&mut StdRng::seed_from_u64(split_seed));
    let reserve = ((yahoo.test.len() as f64 * config.graph_fraction).round() as usize)
        .clamp(1, yahoo.test.len() - 1);
    let mut reserved = vec![false; yahoo.test.len()];
    for &i in &order[..reserve] {
        reserved[i] = true;
    }
    let mut graph_table = InteractionTable::default();
    let mut eval_table = InteractionTable::default();
    for (i, r) in yahoo.test.rows().iter().enumerate() {
        let target = if reserved[i] {
            &mut graph_table
        } else {
            &mut eval_table
        };
        target.push(r.user.clone(), r.item.clone(), r.rating);
    }

    // Topic discovery on the reserved unbiased sample.
    let graph = BipartiteGraph::from_interactions(&graph_table)?;
    let d = &config.discovery;
    let walks = generate_walks(
        &graph,
        d.walks_per_node,
        d.walk_length,
        resolve_seed(config.master_seed, setting_index, seed_index, "walks"),
    )?;
    let sgns = SkipGramConfig {
        dim: d.embedding_dim,
        window: d.window,
        negatives: d.negatives,
        epochs: d.epochs,
        learning_rate: d.learning_rate,
        seed: resolve_seed(config.master_seed, setting_index, seed_index, "sgns"),
    };
    let embeddings = train_embeddings(&graph, &walks, &sgns)?;
    let gmm = fit_gmm(
        &embeddings.embeddings.item_vectors,
        &GmmConfig {
            components: clusters,
            max_iters: d.gmm_max_iters,
            tol: d.gmm_tol,
            seed: resolve_seed(config.master_seed, setting_index, seed_index, "gmm"),
            ..GmmConfig::default()
        },
    )?;
    let item_ids: Vec<String> = graph.item_ids().iter().map(str::to_owned).collect();
    let topics = assign_topics(&gmm, &item_ids, &embeddings.embeddings.item_vectors)?;

    // Items never seen in the reserved sample have no embedding and no
    // topic; interactions on them cannot enter the PE simulation.
    let (train_kept, _) = filter_to_assigned(&yahoo.train, &topics);
    let (eval_kept, _) = filter_to_assigned(&eval_table, &topics);
    if train_kept.is_empty() || eval_kept.is_empty() {
        return Err(Error::EmptyInput);
    }

    let topic_train = aggregate_to_topics(&train_kept, &topics)?;
    let topic_eval = aggregate_to_topics(&eval_kept, &topics)?;
    let topic_sample = aggregate_to_topics(&graph_table, &topics)?;

    // Shared user universe across splits, first appearance in train order.
    let mut universe: Vec<&str> = Vec::new();
    for r in topic_train.rows() {
        universe.push(&r.user);
    }
    for r in topic_eval.rows() {
        universe.push(&r.user);
    }
    for r in topic_sample.rows() {
        universe.push(&r.user);
    }
    let users = IdIndex::from_ids(universe);
    let num_topics = topics.num_topics();

    let train = topic_train.to_dataset(&users, num_topics)?;
    let test = topic_eval.to_dataset(&users, num_topics)?;
    let props = estimate_propensities_nb(
        &topic_train,
        &topic_sample,
        users.len() * num_topics,
        config.rho_min,
    )?;

    config
        .methods
        .iter()
        .map(|&m| {
            run_method(
                config,
                m,
                &train,
                &test,
                &props,
                setting_index,
                seed_index,
            )
        })
        .collect()
}

fn run_cell(
    config: &ExperimentConfig,
    yahoo: Option<&io::YahooData>,
    setting_index: usize,
    seed_index: usize,
) -> CellOutcome {
    let result = match (&config.sweep, yahoo) {
        (SweepAxis::Alphas(alphas), _) => {
            run_synth_cell(config, alphas[setting_index], setting_index, seed_index)
        }
        (SweepAxis::Clusters(counts), Some(data)) => {
            run_yahoo_cell(config, data, counts[setting_index], setting_index, seed_index)
        }
        (SweepAxis::Clusters(_), None) => Err(Error::Config("dataset not loaded".into())),
    };
    match result {
        Ok(scores) => CellOutcome {
            setting_index,
            seed_index,
            scores,
            error: None,
        },
        Err(e) => CellOutcome {
            setting_index,
            seed_index,
            scores: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn write_cell_artifacts(config: &ExperimentConfig, cell: &CellOutcome) -> Result<()> {
    let label = config.sweep.label(cell.setting_index);
    let dir = config.output_dir.join(&label).join(cell.seed_index.to_string());
    fs::create_dir_all(&dir)?;
    if let Some(message) = &cell.error {
        fs::write(dir.join("error.txt"), format!("{message}\n"))?;
        return Ok(());
    }
    let mut out = String::from("method\tmae\tmse\tndcg\n");
    for s in &cell.scores {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\n",
            s.method, s.mae, s.mse, s.ndcg
        ));
    }
    fs::write(dir.join("scores.tsv"), out)?;
    Ok(())
}

fn format_p(p: Option<f64>) -> String {
    match p {
        Some(v) => format!("{v:.4e}"),
        None => "-".to_string(),
    }
}

fn aggregate(config: &ExperimentConfig, cells: &[CellOutcome]) -> ExperimentOutcome {
    let mut per_seed: BTreeMap<(usize, Method), Vec<(usize, MethodScores)>> = BTreeMap::new();
    let mut errors: Vec<(String, usize, String)> = Vec::new();
    for cell in cells {
        if let Some(message) = &cell.error {
            errors.push((
                config.sweep.label(cell.setting_index),
                cell.seed_index,
                message.clone(),
            ));
            continue;
        }
        for s in &cell.scores {
            per_seed
                .entry((cell.setting_index, s.method))
                .or_default()
                .push((cell.seed_index, *s));
        }
    }
    errors.sort();

    let mut rows = Vec::new();
    for setting in 0..config.sweep.len() {
        let label = config.sweep.label(setting);
        let baseline = per_seed.get(&(setting, Method::Mf));
        for &method in &config.methods {
            let Some(scores) = per_seed.get(&(setting, method)) else {
                continue;
            };
            let n = scores.len() as f64;
            let mae = scores.iter().map(|(_, s)| s.mae).sum::<f64>() / n;
            let mse = scores.iter().map(|(_, s)| s.mse).sum::<f64>() / n;
            let ndcg = scores.iter().map(|(_, s)| s.ndcg).sum::<f64>() / n;
            let (p_mae, p_mse, p_ndcg) = if method == Method::Mf {
                (None, None, None)
            } else if let Some(base) = baseline {
                // Pair on seeds where both the method and the baseline ran.
                let base_by_seed: BTreeMap<usize, MethodScores> =
                    base.iter().map(|&(k, s)| (k, s)).collect();
                let mut mine = Vec::new();
                let mut theirs = Vec::new();
                for &(k, s) in scores {
                    if let Some(b) = base_by_seed.get(&k) {
                        mine.push(s);
                        theirs.push(*b);
                    }
                }
                if mine.len() >= 2 {
                    let p_of = |f: fn(&MethodScores) -> f64| {
                        let a: Vec<f64> = mine.iter().map(f).collect();
                        let b: Vec<f64> = theirs.iter().map(f).collect();
                        paired_ttest(&a, &b).ok().map(|r| r.p)
                    };
                    (p_of(|s| s.mae), p_of(|s| s.mse), p_of(|s| s.ndcg))
                } else {
                    (None, None, None)
                }
            } else {
                (None, None, None)
            };
            rows.push(SummaryRow {
                setting_label: label.clone(),
                method,
                mae,
                mse,
                ndcg,
                p_mae,
                p_mse,
                p_ndcg,
                seeds_used: scores.len(),
            });
        }
    }

    let summary_tsv = render_summary_tsv(config, &rows);
    let summary_table = render_summary_table(config, &rows);
    ExperimentOutcome {
        rows,
        errors,
        per_seed,
        summary_tsv,
        summary_table,
    }
}

fn render_summary_tsv(config: &ExperimentConfig, rows: &[SummaryRow]) -> String {
    let mut out = format!("method\tsetting\tmae\tmse\tndcg@{}\tp_vs_mf\n", config.ndcg_k);
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\n",
            r.method,
            r.setting_label,
            r.mae,
            r.mse,
            r.ndcg,
            format_p(r.p_mae),
        ));
    }
    out
}

fn render_summary_table(config: &ExperimentConfig, rows: &[SummaryRow]) -> String {
    const SIGNIFICANCE: f64 = 0.01;
    let mark = |value: f64, base: f64, p: Option<f64>, lower_better: bool| {
        let improved = if lower_better { value < base } else { value > base };
        if improved && p.map(|p| p < SIGNIFICANCE).unwrap_or(false) {
            "\u{2020}"
        } else {
            ""
        }
    };
    let mut lines: Vec<[String; 5]> = Vec::new();
    let mut current = String::new();
    for r in rows {
        let base = rows
            .iter()
            .find(|b| b.setting_label == r.setting_label && b.method == Method::Mf);
        let (m1, m2, m3) = match (r.method, base) {
            (Method::Mf, _) | (_, None) => ("", "", ""),
            (_, Some(b)) => (
                mark(r.mae, b.mae, r.p_mae, true),
                mark(r.mse, b.mse, r.p_mse, true),
                mark(r.ndcg, b.ndcg, r.p_ndcg, false),
            ),
        };
        let setting = if r.setting_label == current {
            String::new()
        } else {
            current = r.setting_label.clone();
            r.setting_label.clone()
        };
        lines.push([
            setting,
            r.method.to_string(),
            format!("{:.4}{m1}", r.mae),
            format!("{:.4}{m2}", r.mse),
            format!("{:.4}{m3}", r.ndcg),
        ]);
    }
    let header = [
        "setting".to_string(),
        "method".to_string(),
        "MAE".to_string(),
        "MSE".to_string(),
        format!("NDCG@{}", config.ndcg_k),
    ];
    let mut widths = [0usize; 5];
    for row in std::iter::once(&header).chain(lines.iter()) {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let render = |row: &[String; 5]| {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            line.push_str(cell);
            if i < 4 {
                line.push_str(&" ".repeat(widths[i] - cell.chars().count() + 2));
            }
        }
        line.push('\n');
        line
    };
    let mut out = render(&header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 8));
    out.push('\n');
    for row in &lines {
        out.push_str(&render(row));
    }
    out
}

/// Run every (setting, seed) cell on a worker pool, persist per-cell
/// artifacts, aggregate means and significance marks, and write
/// `summary.tsv`, `summary.txt`, and `errors.tsv` under the output
/// directory. Cell failures are isolated: they land in the errors manifest
/// and leave other cells untouched.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;

    let yahoo = match config.mode {
        ExperimentMode::SemiSynthetic => Some(io::load_yahoo(
            config.yahoo_train.as_deref().expect("validated"),
            config.yahoo_test.as_deref().expect("validated"),
        )?),
        ExperimentMode::FullySynthetic => None,
    };

    let cells: Vec<(usize, usize)> = (0..config.sweep.len())
        .flat_map(|s| (0..config.num_seeds).map(move |k| (s, k)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, k)| run_cell(config, yahoo.as_ref(), s, k))
            .collect()
    });

    for cell in &outcomes {
        write_cell_artifacts(config, cell)?;
    }

    let outcome = aggregate(config, &outcomes);
    fs::write(config.output_dir.join("summary.tsv"), &outcome.summary_tsv)?;
    fs::write(config.output_dir.join("summary.txt"), &outcome.summary_table)?;
    let mut errors_tsv = String::from("setting\tseed\terror\n");
    for (setting, seed, message) in &outcome.errors {
        errors_tsv.push_str(&format!("{setting}\t{seed}\t{message}\n"));
    }
    fs::write(config.output_dir.join("errors.tsv"), errors_tsv)?;
    Ok(outcome)
}

/// Ratings per topic, multi-membership items counted once per topic, sorted
/// by descending count then ascending topic id. Items without a topic
/// assignment contribute nothing.
pub fn topic_distribution_stats(
    interactions: &InteractionTable,
    topics: &TopicAssignment,
) -> Vec<(usize, u64)> {
    let mut counts = vec![0u64; topics.num_topics()];
    for r in interactions.rows() {
        if let Some(assigned) = topics.topics_of(&r.item) {
            for &t in assigned {
                counts[t] += 1;
            }
        }
    }
    let mut out: Vec<(usize, u64)> = counts.into_iter().enumerate().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

/// Flat key/value configuration with `[section]` nesting, parsed from the
/// experiment config file; every key can be overridden by a `--key=value`
/// command-line flag (section keys become `section.key`).
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn from_file(path: &Path) -> Result<ConfigMap> {
        let content = fs::read_to_string(path)?;
        let mut map = ConfigMap::default();
        let mut section = String::new();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: format!("expected `key = value`, got {raw:?}"),
                });
            };
            let full_key = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            map.values.insert(full_key, value.trim().to_string());
        }
        Ok(map)
    }

    /// Apply one `--key=value` (or bare `key=value`) override. `--seed` is
    /// an alias for `--master_seed`.
    pub fn apply_override(&mut self, raw: &str) -> Result<()> {
        let stripped = raw.trim_start_matches('-');
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(Error::Config(format!(
                "override {raw:?} is not of the form --key=value"
            )));
        };
        let key = match key.trim() {
            "seed" => "master_seed",
            other => other,
        };
        self.values
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value {v:?} for key {key:?}"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad value {f:?} in key {key:?}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Build the full experiment configuration from a parsed [`ConfigMap`],
/// filling unset keys with defaults.
pub fn resolve_config(map: &ConfigMap) -> Result<ExperimentConfig> {
    let mode = match map.get("mode").unwrap_or("fully-synthetic") {
        "fully-synthetic" => ExperimentMode::FullySynthetic,
        "semi-synthetic" => ExperimentMode::SemiSynthetic,
        other => return Err(Error::Config(format!("unknown mode {other:?}"))),
    };
    let sweep = match mode {
        ExperimentMode::FullySynthetic => SweepAxis::Alphas(
            map.list("sweep.alphas")?
                .unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]),
        ),
        ExperimentMode::SemiSynthetic => SweepAxis::Clusters(
            map.list("sweep.clusters")?
                .unwrap_or_else(|| vec![25, 50, 75, 100]),
        ),
    };
    let methods = match map.get("methods") {
        None => vec![Method::Mf, Method::ExpoMf, Method::MfIps],
        Some(raw) => raw
            .split(',')
            .map(Method::parse)
            .collect::<Result<Vec<_>>>()?,
    };

    let synth = SynthConfig {
        num_users: map.parse_key("synth.num_users")?.unwrap_or(1000),
        num_topics: map.parse_key("synth.num_topics")?.unwrap_or(50),
        dim: map.parse_key("synth.dim")?.unwrap_or(10),
        alpha: 1.0,
        sparsity: map.parse_key("synth.sparsity")?.unwrap_or(0.05),
        positivity_decay: map.parse_key("synth.positivity_decay")?.unwrap_or(0.5),
        test_rate: map.parse_key("synth.test_rate")?.unwrap_or(0.05),
        seed: 0,
        rho_min: map.parse_key("rho_min")?.unwrap_or(DEFAULT_RHO_MIN),
    };

    let loss: LossKind = map
        .get("grid.loss")
        .unwrap_or("squared")
        .parse()?;
    let dims: Vec<usize> = map.list("grid.dims")?.unwrap_or_else(|| vec![5, 10]);
    let l2s: Vec<f64> = map
        .list("grid.l2")?
        .unwrap_or_else(|| vec![1e-3, 1e-2, 1e-1]);
    let lrs: Vec<f64> = map.list("grid.learning_rates")?.unwrap_or_else(|| vec![0.01]);
    let epochs = map.parse_key("grid.epochs")?.unwrap_or(150);
    let batch_size = map.parse_key("grid.batch_size")?.unwrap_or(256);
    let mut mf_grid = Vec::new();
    for &dim in &dims {
        for &l2 in &l2s {
            for &lr in &lrs {
                mf_grid.push(TrainConfig {
                    dim,
                    l2,
                    learning_rate: lr,
                    batch_size,
                    epochs,
                    loss,
                    seed: 0,
                    ..TrainConfig::default()
                });
            }
        }
    }

    let expomf_dims: Vec<usize> = map.list("expomf.dims")?.unwrap_or_else(|| vec![10]);
    let ridges: Vec<f64> = map.list("expomf.ridge")?.unwrap_or_else(|| vec![0.1]);
    let mut expomf_grid = Vec::new();
    for &dim in &expomf_dims {
        for &ridge in &ridges {
            expomf_grid.push(ExpoMfConfig {
                dim,
                ridge,
                noise_precision: map.parse_key("expomf.noise_precision")?.unwrap_or(1.0),
                max_iters: map.parse_key("expomf.max_iters")?.unwrap_or(30),
                tol: map.parse_key("expomf.tol")?.unwrap_or(1e-5),
                seed: 0,
            });
        }
    }

    let discovery = TopicDiscoveryConfig {
        walks_per_node: map.parse_key("topics.walks_per_node")?.unwrap_or(10),
        walk_length: map.parse_key("topics.walk_length")?.unwrap_or(40),
        embedding_dim: map.parse_key("topics.dim")?.unwrap_or(32),
        window: map.parse_key("topics.window")?.unwrap_or(5),
        negatives: map.parse_key("topics.negatives")?.unwrap_or(5),
        epochs: map.parse_key("topics.epochs")?.unwrap_or(5),
        learning_rate: map.parse_key("topics.learning_rate")?.unwrap_or(0.025),
        gmm_max_iters: map.parse_key("topics.gmm_max_iters")?.unwrap_or(100),
        gmm_tol: map.parse_key("topics.gmm_tol")?.unwrap_or(1e-4),
    };

    let workers = match map.parse_key::<usize>("workers")? {
        Some(w) => w,
        None => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };

    Ok(ExperimentConfig {
        mode,
        sweep,
        methods,
        num_seeds: map.parse_key("num_seeds")?.unwrap_or(10),
        master_seed: map.parse_key("master_seed")?.unwrap_or(0),
        output_dir: PathBuf::from(map.get("output_dir").unwrap_or("out")),
        workers,
        folds: map.parse_key("folds")?.unwrap_or(5),
        ndcg_k: map.parse_key("ndcg_k")?.unwrap_or(3),
        rho_min: map.parse_key("rho_min")?.unwrap_or(DEFAULT_RHO_MIN),
        synth,
        mf_grid,
        expomf_grid,
        yahoo_train: map.get("data.yahoo_train").map(PathBuf::from),
        yahoo_test: map.get("data.yahoo_test").map(PathBuf::from),
        graph_fraction: map.parse_key("data.graph_fraction")?.unwrap_or(0.2),
        discovery,
    })
}

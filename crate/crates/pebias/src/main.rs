//! Command-line front end: dataset generation, topic discovery, PE
//! simulation, model training and evaluation, topic statistics, and the
//! full experiment harness.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use pebias::estimators::{train_expomf, train_mf, ExpoMfConfig, LossKind, TrainConfig};
use pebias::eval::{ndcg_at_k, rating_metrics};
use pebias::experiment::{
    resolve_config, run_experiment, topic_distribution_stats, ConfigMap,
};
use pebias::io;
use pebias::pe::{aggregate_to_topics, estimate_propensities_nb};
use pebias::seeding;
use pebias::synth::{generate_dataset, SynthConfig};
use pebias::topics::{
    assign_topics, fit_gmm, generate_walks, train_embeddings, BipartiteGraph, GmmConfig,
    SkipGramConfig,
};
use pebias::types::{IdIndex, InteractionTable, PropensityModel, DEFAULT_RHO_MIN};

#[derive(Parser)]
#[command(
    name = "pebias",
    about = "Selection-bias simulation and debiasing for topic-level preference elicitation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fully-synthetic preference-elicitation dataset.
    SynthGen {
        /// Output directory for train.tsv, test.tsv, propensities.tsv,
        /// and config.echo.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        num_users: usize,
        #[arg(long, default_value_t = 50)]
        num_topics: usize,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        sparsity: f64,
        #[arg(long, default_value_t = 0.5)]
        positivity_decay: f64,
        #[arg(long, default_value_t = 0.05)]
        test_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RHO_MIN)]
        rho_min: f64,
    },
    /// Discover synthetic topics from interaction structure.
    Topics {
        /// Ratings TSV (`user<TAB>item<TAB>rating`).
        #[arg(long)]
        ratings: PathBuf,
        /// Output directory for topics.tsv, embeddings.tsv, and fit_report.txt.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        clusters: usize,
        #[arg(long, default_value_t = 10)]
        walks_per_node: usize,
        #[arg(long, default_value_t = 40)]
        walk_length: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate item-level ratings into topic-level PE data and estimate
    /// observation propensities.
    SimulatePe {
        /// Biased (self-selected) ratings TSV.
        #[arg(long)]
        train: PathBuf,
        /// Unbiased (uniformly collected) ratings TSV.
        #[arg(long)]
        test: PathBuf,
        /// Topic assignment TSV (`item<TAB>topic`).
        #[arg(long)]
        topics: PathBuf,
        /// Output directory for train_topics.tsv, test_topics.tsv, and
        /// propensities.tsv.
        #[arg(long)]
        out: PathBuf,
        /// Fraction of the unbiased data reserved for propensity
        /// estimation and excluded from test_topics.tsv.
        #[arg(long, default_value_t = 0.2)]
        sample_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RHO_MIN)]
        rho_min: f64,
    },
    /// Train a rating model on topic-level PE data.
    Train {
        /// Training topics TSV (`user<TAB>topic<TAB>rating`).
        #[arg(long)]
        train: PathBuf,
        /// One of `mf`, `mf-ips`, `expomf`.
        #[arg(long)]
        method: String,
        /// Propensity TSV (per-cell or per-level); required for `mf-ips`.
        #[arg(long)]
        props: Option<PathBuf>,
        /// Model output path; a `<out>.index.tsv` sidecar records the user
        /// index the model rows refer to.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 1e-3)]
        l2: f64,
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        /// `squared` or `absolute`.
        #[arg(long, default_value = "squared")]
        loss: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Topic universe size; defaults to the larger of the train table's
        /// and the propensity file's topic range.
        #[arg(long)]
        num_topics: Option<usize>,
    },
    /// Evaluate a trained model on an unbiased topic-level test set.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Test topics TSV.
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 3)]
        ndcg_k: usize,
    },
    /// Per-topic rating counts, plot-ready.
    Stats {
        /// Ratings TSV (`user<TAB>item<TAB>rating`); alternative to the
        /// --coat-* inputs.
        #[arg(long, conflicts_with = "coat_ratings")]
        ratings: Option<PathBuf>,
        /// Topic assignment TSV (`item<TAB>topic`).
        #[arg(long, requires = "ratings")]
        topics: Option<PathBuf>,
        /// Native Coat rating matrix (dense, rows = users, 0 = unobserved).
        #[arg(long, requires = "coat_features")]
        coat_ratings: Option<PathBuf>,
        /// Native Coat item-feature 0/1 matrix; columns double as topics
        /// and as covariates for the logistic propensity model.
        #[arg(long)]
        coat_features: Option<PathBuf>,
        /// Native Coat dense propensity matrix; fit from covariates when
        /// absent.
        #[arg(long)]
        coat_propensities: Option<PathBuf>,
        /// With --coat-*: also export ratings.tsv, topics.tsv, and lifted
        /// topic-level propensities.tsv in interchange format.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Output TSV (`topic<TAB>count`), sorted by descending count.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full sweep experiment from a config file.
    Experiment {
        /// Key/value config file with [section] nesting.
        config: PathBuf,
        /// Overrides of the form `--key=value` (e.g. `--master_seed=7`,
        /// `--synth.num_users=500`, `--workers=4`).
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::SynthGen {
            out,
            num_users,
            num_topics,
            dim,
            alpha,
            sparsity,
            positivity_decay,
            test_rate,
            seed,
            rho_min,
        } => {
            let config = SynthConfig {
                num_users,
                num_topics,
                dim,
                alpha,
                sparsity,
                positivity_decay,
                test_rate,
                seed,
                rho_min,
            };
            synth_gen(&out, &config)
        }
        Command::Topics {
            ratings,
            out,
            clusters,
            walks_per_node,
            walk_length,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            seed,
        } => topics_cmd(
            &ratings,
            &out,
            clusters,
            walks_per_node,
            walk_length,
            dim,
            window,
            negatives,
            epochs,
            learning_rate,
            seed,
        ),
        Command::SimulatePe {
            train,
            test,
            topics,
            out,
            sample_frac,
            seed,
            rho_min,
        } => simulate_pe(&train, &test, &topics, &out, sample_frac, seed, rho_min),
        Command::Train {
            train,
            method,
            props,
            out,
            dim,
            l2,
            learning_rate,
            batch_size,
            epochs,
            loss,
            seed,
            num_topics,
        } => train_cmd(
            &train,
            &method,
            props.as_deref(),
            &out,
            TrainConfig {
                dim,
                l2,
                learning_rate,
                batch_size,
                epochs,
                loss: loss.parse::<LossKind>()?,
                seed,
                ..TrainConfig::default()
            },
            num_topics,
        ),
        Command::Eval { model, test, ndcg_k } => eval_cmd(&model, &test, ndcg_k),
        Command::Stats {
            ratings,
            topics,
            coat_ratings,
            coat_features,
            coat_propensities,
            export,
            out,
        } => match (ratings, coat_ratings) {
            (Some(r), None) => {
                let t = topics.ok_or_else(|| anyhow::anyhow!("--topics is required"))?;
                stats_cmd(&r, &t, &out)
            }
            (None, Some(r)) => {
                let f = coat_features
                    .ok_or_else(|| anyhow::anyhow!("--coat-features is required"))?;
                coat_stats_cmd(
                    &r,
                    coat_propensities.as_deref(),
                    &f,
                    export.as_deref(),
                    &out,
                )
            }
            _ => bail!("provide either --ratings/--topics or --coat-ratings/--coat-features"),
        },
        Command::Experiment { config, overrides } => experiment_cmd(&config, &overrides),
    }
}

fn synth_gen(out: &Path, config: &SynthConfig) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let ds = generate_dataset(config).context("generating synthetic dataset")?;
    io::write_topic_interactions(&out.join("train.tsv"), &ds.train)?;
    io::write_topic_interactions(&out.join("test.tsv"), &ds.test)?;
    let ids: Vec<String> = (0..config.num_users)
        .map(pebias::synth::synth_user_id)
        .collect();
    let users = IdIndex::from_ids(ids.iter().map(String::as_str));
    io::write_cell_propensities(&out.join("propensities.tsv"), &ds.truth_propensities, &users)?;
    let echo = format!(
        "num_users = {}\nnum_topics = {}\ndim = {}\nalpha = {}\nsparsity = {}\n\
         positivity_decay = {}\ntest_rate = {}\nseed = {}\nrho_min = {}\n\
         train_rows = {}\ntest_rows = {}\n",
        config.num_users,
        config.num_topics,
        config.dim,
        config.alpha,
        config.sparsity,
        config.positivity_decay,
        config.test_rate,
        config.seed,
        config.rho_min,
        ds.train.len(),
        ds.test.len(),
    );
    fs::write(out.join("config.echo"), echo)?;
    println!(
        "wrote {} train rows, {} test rows to {}",
        ds.train.len(),
        ds.test.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn topics_cmd(
    ratings: &Path,
    out: &Path,
    clusters: usize,
    walks_per_node: usize,
    walk_length: usize,
    dim: usize,
    window: usize,
    negatives: usize,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let table = io::read_interactions(ratings)?;
    let graph = BipartiteGraph::from_interactions(&table)?;
    let walks = generate_walks(
        &graph,
        walks_per_node,
        walk_length,
        seeding::derive_labeled(seed, "walks"),
    )?;
    let sgns = SkipGramConfig {
        dim,
        window,
        negatives,
        epochs,
        learning_rate,
        seed: seeding::derive_labeled(seed, "sgns"),
    };
    let fit = train_embeddings(&graph, &walks, &sgns)?;
    let gmm = fit_gmm(
        &fit.embeddings.item_vectors,
        &GmmConfig {
            components: clusters,
            seed: seeding::derive_labeled(seed, "gmm"),
            ..GmmConfig::default()
        },
    )?;
    let item_ids: Vec<String> = graph.item_ids().iter().map(str::to_owned).collect();
    let topics = assign_topics(&gmm, &item_ids, &fit.embeddings.item_vectors)?;

    io::write_topic_pairs(&out.join("topics.tsv"), &topics)?;
    io::write_embeddings(
        &out.join("embeddings.tsv"),
        &fit.embeddings,
        graph.user_ids(),
        graph.item_ids(),
    )?;
    let mut sizes = vec![0usize; topics.num_topics()];
    for (_, assigned) in topics.items() {
        for &t in assigned {
            sizes[t] += 1;
        }
    }
    let mut report = format!(
        "components_requested = {clusters}\ncomponents_used = {}\nfinal_log_likelihood = {:.6}\n",
        topics.num_topics(),
        gmm.log_likelihood,
    );
    report.push_str("cluster_sizes =");
    for s in &sizes {
        report.push_str(&format!(" {s}"));
    }
    report.push('\n');
    fs::write(out.join("fit_report.txt"), report)?;
    println!(
        "assigned {} items to {} topics ({})",
        topics.num_items(),
        topics.num_topics(),
        out.display()
    );
    Ok(())
}

fn simulate_pe(
    train: &Path,
    test: &Path,
    topics_path: &Path,
    out: &Path,
    sample_frac: f64,
    seed: u64,
    rho_min: f64,
) -> anyhow::Result<()> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if !(0.0..1.0).contains(&sample_frac) {
        bail!("sample fraction {sample_frac} not in [0,1)");
    }
    fs::create_dir_all(out)?;
    let train_items = io::read_interactions(train)?;
    let test_items = io::read_interactions(test)?;
    let topics = io::read_topic_pairs(topics_path)?;

    let mut order: Vec<usize> = (0..test_items.len()).collect();
    order.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
    let reserve = ((test_items.len() as f64 * sample_frac).round() as usize)
        .min(test_items.len().saturating_sub(1));
    let mut sample_table = InteractionTable::default();
    let mut eval_table = InteractionTable::default();
    let reserved: std::collections::HashSet<usize> = order[..reserve].iter().copied().collect();
    for (i, r) in test_items.rows().iter().enumerate() {
        let target = if reserved.contains(&i) {
            &mut sample_table
        } else {
            &mut eval_table
        };
        target.push(r.user.clone(), r.item.clone(), r.rating);
    }

    let topic_train = aggregate_to_topics(&train_items, &topics)?;
    let topic_eval = aggregate_to_topics(&eval_table, &topics)?;

    io::write_topic_interactions(&out.join("train_topics.tsv"), &topic_train)?;
    io::write_topic_interactions(&out.join("test_topics.tsv"), &topic_eval)?;

    if reserve > 0 {
        let topic_sample = aggregate_to_topics(&sample_table, &topics)?;
        let mut users: Vec<&str> = Vec::new();
        for r in topic_train.rows() {
            users.push(&r.user);
        }
        for r in topic_eval.rows() {
            users.push(&r.user);
        }
        for r in topic_sample.rows() {
            users.push(&r.user);
        }
        let universe = IdIndex::from_ids(users);
        let props = estimate_propensities_nb(
            &topic_train,
            &topic_sample,
            universe.len() * topics.num_topics(),
            rho_min,
        )?;
        io::write_level_propensities(&out.join("propensities.tsv"), &props)?;
    } else {
        eprintln!("sample fraction 0: skipping propensity estimation");
    }
    println!(
        "wrote {} train and {} test topic rows to {}",
        topic_train.len(),
        topic_eval.len(),
        out.display()
    );
    Ok(())
}

fn load_props_file(path: &Path) -> anyhow::Result<(PropensityModel, Option<IdIndex>)> {
    let first_line = fs::read_to_string(path)?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    match first_line.as_str() {
        io::CELL_PROPENSITY_HEADER => {
            let (model, users) = io::read_cell_propensities(path)?;
            Ok((model, Some(users)))
        }
        io::LEVEL_PROPENSITY_HEADER => Ok((io::read_level_propensities(path)?, None)),
        other => bail!("unrecognized propensity header {other:?}"),
    }
}

fn train_cmd(
    train: &Path,
    method: &str,
    props: Option<&Path>,
    out: &Path,
    config: TrainConfig,
    num_topics: Option<usize>,
) -> anyhow::Result<()> {
    let table = io::read_topic_interactions(train)?;
    let loaded = props.map(load_props_file).transpose()?;

    // Universe: per-cell propensity files pin it; otherwise the train table
    // (plus any explicit override) does.
    let (users, topics) = match &loaded {
        Some((PropensityModel::PerCell { num_topics: t, .. }, Some(users))) => {
            (users.clone(), num_topics.unwrap_or(*t).max(*t))
        }
        _ => (
            table.user_index()?,
            num_topics.unwrap_or_else(|| table.min_num_topics()),
        ),
    };
    let data = table.to_dataset(&users, topics.max(table.min_num_topics()))?;

    match method {
        "mf" | "mf-ips" => {
            let train_props = match method {
                "mf-ips" => Some(
                    &loaded
                        .as_ref()
                        .ok_or_else(|| anyhow::anyhow!("mf-ips requires --props"))?
                        .0,
                ),
                _ => None,
            };
            let fit = train_mf(&data, &config, train_props)?;
            io::save_factor_model(out, &fit.model)?;
            println!(
                "trained {method} ({} epochs); final training loss {:.6}",
                config.epochs,
                fit.train_loss.last().copied().unwrap_or(f64::NAN)
            );
        }
        "expomf" => {
            let expomf = ExpoMfConfig {
                dim: config.dim,
                ridge: config.l2.max(1e-6),
                max_iters: config.epochs,
                seed: config.seed,
                ..ExpoMfConfig::default()
            };
            let fit = train_expomf(&data, &expomf)?;
            io::save_expomf_model(out, &fit.model)?;
            println!(
                "trained expomf ({} EM iterations); final objective {:.6}",
                fit.objective.len(),
                fit.objective.last().copied().unwrap_or(f64::NAN)
            );
        }
        other => bail!("unknown method {other:?} (expected mf, mf-ips, expomf)"),
    }
    let sidecar = out.with_extension("index.tsv");
    io::write_id_index(&sidecar, &users)?;
    println!("model written to {}, user index to {}", out.display(), sidecar.display());
    Ok(())
}

/// Extend the trained user index with test users the model never saw; the
/// returned count tells the caller how many rows to append as cold-start
/// users (zero factors and bias, so predictions fall back to the global
/// mean plus topic bias).
fn extend_user_index(users: &IdIndex, test: &pebias::types::TopicInteractionTable) -> (IdIndex, usize) {
    let mut ids: Vec<&str> = users.iter().collect();
    for r in test.rows() {
        ids.push(&r.user);
    }
    let extended = IdIndex::from_ids(ids);
    let cold = extended.len() - users.len();
    (extended, cold)
}

fn eval_cmd(model_path: &Path, test: &Path, ndcg_k: usize) -> anyhow::Result<()> {
    let sidecar = model_path.with_extension("index.tsv");
    let users = io::read_id_index(&sidecar)
        .with_context(|| format!("reading user index sidecar {}", sidecar.display()))?;
    let table = io::read_topic_interactions(test)?;
    let (extended, cold) = extend_user_index(&users, &table);
    if cold > 0 {
        eprintln!("{cold} test user(s) unseen in training; scored as cold-start");
    }

    let header = fs::read_to_string(model_path)?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    let (mae, mse, ndcg) = if header.starts_with("pe-mf") {
        let mut model = io::load_factor_model(model_path)?;
        model.user_factors.resize(extended.len() * model.dim, 0.0);
        model.user_bias.resize(extended.len(), 0.0);
        model.num_users = extended.len();
        let data = table.to_dataset(&extended, model.num_topics)?;
        let (mae, mse) = rating_metrics(&data, &model)?;
        (mae, mse, ndcg_at_k(&data, &model, ndcg_k)?)
    } else if header.starts_with("pe-expomf") {
        let mut model = io::load_expomf_model(model_path)?;
        model.user_factors.resize(extended.len() * model.dim, 0.0);
        model.num_users = extended.len();
        let data = table.to_dataset(&extended, model.num_topics)?;
        let (mae, mse) = rating_metrics(&data, &model)?;
        (mae, mse, ndcg_at_k(&data, &model, ndcg_k)?)
    } else {
        bail!("unrecognized model header {header:?}");
    };
    println!("mae\tmse\tndcg@{ndcg_k}");
    println!("{mae:.6}\t{mse:.6}\t{ndcg:.6}");
    Ok(())
}

fn write_stats(
    table: &InteractionTable,
    topics: &pebias::types::TopicAssignment,
    out: &Path,
) -> anyhow::Result<()> {
    let stats = topic_distribution_stats(table, topics);
    let mut text = String::from("topic\tcount\n");
    for (topic, count) in &stats {
        text.push_str(&format!("{topic}\t{count}\n"));
    }
    fs::write(out, text)?;
    println!("wrote {} topic rows to {}", stats.len(), out.display());
    Ok(())
}

fn stats_cmd(ratings: &Path, topics_path: &Path, out: &Path) -> anyhow::Result<()> {
    let table = io::read_interactions(ratings)?;
    let topics = io::read_topic_pairs(topics_path)?;
    write_stats(&table, &topics, out)
}

fn coat_stats_cmd(
    ratings: &Path,
    propensities: Option<&Path>,
    features: &Path,
    export: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let data = io::load_coat(ratings, propensities, features, None)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = export {
        fs::create_dir_all(dir)?;
        io::write_interactions(&dir.join("ratings.tsv"), &data.interactions)?;
        io::write_topic_pairs(&dir.join("topics.tsv"), &data.topics)?;
        let lifted = pebias::pe::lift_item_propensities_to_topics(
            &data.item_propensities,
            &data.topics,
            DEFAULT_RHO_MIN,
        )?;
        io::write_cell_propensities(&dir.join("propensities.tsv"), &lifted, &data.users)?;
        println!("exported interchange files to {}", dir.display());
    }
    write_stats(&data.interactions, &data.topics, out)
}

fn experiment_cmd(config_path: &Path, overrides: &[String]) -> anyhow::Result<()> {
    let mut map = ConfigMap::from_file(config_path)?;
    for raw in overrides {
        map.apply_override(raw)?;
    }
    let config = resolve_config(&map)?;
    let outcome = run_experiment(&config)?;
    print!("{}", outcome.summary_table);
    println!(
        "summary written to {}",
        config.output_dir.join("summary.tsv").display()
    );
    if !outcome.errors.is_empty() {
        eprintln!("{} cell(s) failed:", outcome.errors.len());
        for (setting, seed, message) in &outcome.errors {
            eprintln!("  {setting} seed {seed}: {message}");
        }
        std::process::exit(1);
    }
    Ok(())
}

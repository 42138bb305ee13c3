//! File formats: TSV interchange tables, the Yahoo! R3 and Coat dataset
//! loaders, and plain-text model persistence.
//!
//! Every interchange file is UTF-8 TSV with a one-line header. Loaders fail
//! with the offending line number; nothing is dropped silently.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::expomf::ExpoMfModel;
use crate::pe::{fit_logreg_propensities, LogRegConfig, ObservationGrid, PairPropensities};
use crate::topics::EmbeddingTable;
use crate::types::{
    FactorModel, IdIndex, InteractionTable, PropensityModel, TopicAssignment,
    TopicInteractionTable, RATING_MAX, RATING_MIN,
};

pub const INTERACTION_HEADER: &str = "user\titem\trating";
pub const TOPIC_INTERACTION_HEADER: &str = "user\ttopic\trating";
pub const CELL_PROPENSITY_HEADER: &str = "user\ttopic\trho";
pub const LEVEL_PROPENSITY_HEADER: &str = "level\trho";
pub const TOPIC_PAIR_HEADER: &str = "item\ttopic";
pub const ID_INDEX_HEADER: &str = "id\tindex";

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_lines(path: &Path, expected_header: &str) -> Result<Vec<(usize, String)>> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == expected_header => {}
        Some((_, header)) => return Err(Error::Schema(header.to_string())),
        None => return Err(Error::Schema(String::new())),
    }
    Ok(lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn split3<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str, &'a str)> {
    let mut it = line.split('\t');
    match (it.next(), it.next(), it.next(), it.next()) {
        (Some(a), Some(b), Some(c), None) => Ok((a, b, c)),
        _ => Err(parse_error(path, line_no, "expected three tab-separated fields")),
    }
}

fn parse_rating(path: &Path, line_no: usize, field: &str) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line_no, format!("bad rating {field:?}")))?;
    if !(RATING_MIN..=RATING_MAX).contains(&value) {
        return Err(Error::Validation(format!(
            "{}:{line_no}: rating {value} out of [1,5]",
            path.display()
        )));
    }
    Ok(value)
}

/// Write an interaction table, rows sorted by (user index, item index) of
/// the table's own first-appearance maps. Ratings carry six decimals.
pub fn write_interactions(path: &Path, table: &InteractionTable) -> Result<()> {
    let mut out = String::from(INTERACTION_HEADER);
    out.push('\n');
    if !table.is_empty() {
        let (users, items) = table.index_maps()?;
        let mut order: Vec<usize> = (0..table.len()).collect();
        order.sort_by_key(|&i| {
            let r = &table.rows()[i];
            (users.index_of(&r.user), items.index_of(&r.item))
        });
        for i in order {
            let r = &table.rows()[i];
            writeln!(out, "{}\t{}\t{:.6}", r.user, r.item, r.rating).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_interactions(path: &Path) -> Result<InteractionTable> {
    let mut table = InteractionTable::default();
    for (line_no, line) in read_lines(path, INTERACTION_HEADER)? {
        let (user, item, rating) = split3(path, line_no, &line)?;
        table.push(user, item, parse_rating(path, line_no, rating)?);
    }
    Ok(table)
}

/// Write a topic interaction table sorted by (user index, topic id).
pub fn write_topic_interactions(path: &Path, table: &TopicInteractionTable) -> Result<()> {
    let mut out = String::from(TOPIC_INTERACTION_HEADER);
    out.push('\n');
    if !table.is_empty() {
        let users = table.user_index()?;
        let mut order: Vec<usize> = (0..table.len()).collect();
        order.sort_by_key(|&i| {
            let r = &table.rows()[i];
            (users.index_of(&r.user), r.topic)
        });
        for i in order {
            let r = &table.rows()[i];
            writeln!(out, "{}\t{}\t{:.6}", r.user, r.topic, r.rating).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_topic_interactions(path: &Path) -> Result<TopicInteractionTable> {
    let mut table = TopicInteractionTable::default();
    for (line_no, line) in read_lines(path, TOPIC_INTERACTION_HEADER)? {
        let (user, topic, rating) = split3(path, line_no, &line)?;
        let topic: usize = topic
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad topic id {topic:?}")))?;
        table.push(user, topic, parse_rating(path, line_no, rating)?);
    }
    Ok(table)
}

/// Write a dense per-cell propensity model, one row per (user, topic).
pub fn write_cell_propensities(
    path: &Path,
    props: &PropensityModel,
    users: &IdIndex,
) -> Result<()> {
    let PropensityModel::PerCell {
        num_users,
        num_topics,
        rho,
    } = props
    else {
        return Err(Error::Config("expected a per-cell propensity model".into()));
    };
    if *num_users != users.len() {
        return Err(Error::Config(format!(
            "model covers {num_users} users, index has {}",
            users.len()
        )));
    }
    let mut out = String::from(CELL_PROPENSITY_HEADER);
    out.push('\n');
    for u in 0..*num_users {
        let id = users.id_at(u).expect("valid index");
        for t in 0..*num_topics {
            writeln!(out, "{}\t{}\t{:.9}", id, t, rho[u * num_topics + t]).expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read per-cell propensity triples; builds the dense model against the
/// user index derived from the file's own row order.
pub fn read_cell_propensities(path: &Path) -> Result<(PropensityModel, IdIndex)> {
    let mut triples: Vec<(String, usize, f64)> = Vec::new();
    for (line_no, line) in read_lines(path, CELL_PROPENSITY_HEADER)? {
        let (user, topic, rho) = split3(path, line_no, &line)?;
        let topic: usize = topic
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad topic id {topic:?}")))?;
        let rho: f64 = rho
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad propensity {rho:?}")))?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Validation(format!(
                "{}:{line_no}: propensity {rho} outside (0,1]",
                path.display()
            )));
        }
        triples.push((user.to_string(), topic, rho));
    }
    if triples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let users = IdIndex::from_ids(triples.iter().map(|(u, _, _)| u.as_str()));
    let num_topics = triples.iter().map(|&(_, t, _)| t + 1).max().unwrap_or(0);
    let mut rho = vec![f64::NAN; users.len() * num_topics];
    for (user, topic, value) in &triples {
        let u = users.index_of(user).expect("indexed above");
        rho[u * num_topics + topic] = *value;
    }
    if rho.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation(format!(
            "{}: propensity grid has missing cells",
            path.display()
        )));
    }
    Ok((
        PropensityModel::PerCell {
            num_users: users.len(),
            num_topics,
            rho,
        },
        users,
    ))
}

pub fn write_level_propensities(path: &Path, props: &PropensityModel) -> Result<()> {
    let PropensityModel::PerLevel(values) = props else {
        return Err(Error::Config("expected a per-level propensity model".into()));
    };
    let mut out = String::from(LEVEL_PROPENSITY_HEADER);
    out.push('\n');
    for (level, rho) in values.iter().enumerate() {
        writeln!(out, "{}\t{:.9}", level + 1, rho).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_level_propensities(path: &Path) -> Result<PropensityModel> {
    let mut values = [f64::NAN; 5];
    for (line_no, line) in read_lines(path, LEVEL_PROPENSITY_HEADER)? {
        let mut it = line.split('\t');
        let (Some(level), Some(rho), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_error(path, line_no, "expected two fields"));
        };
        let level: usize = level
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad level {level:?}")))?;
        if !(1..=5).contains(&level) {
            return Err(parse_error(path, line_no, format!("level {level} out of 1..5")));
        }
        let rho: f64 = rho
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad propensity {rho:?}")))?;
        values[level - 1] = rho;
    }
    if values.iter().any(|v| v.is_nan() || !(*v > 0.0 && *v <= 1.0)) {
        return Err(Error::Validation(format!(
            "{}: per-level file must define all five levels in (0,1]",
            path.display()
        )));
    }
    Ok(PropensityModel::PerLevel(values))
}

pub fn write_topic_pairs(path: &Path, topics: &TopicAssignment) -> Result<()> {
    let mut out = String::from(TOPIC_PAIR_HEADER);
    out.push('\n');
    for (item, assigned) in topics.items() {
        for &t in assigned {
            writeln!(out, "{item}\t{t}").expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_topic_pairs(path: &Path) -> Result<TopicAssignment> {
    let mut pairs = Vec::new();
    for (line_no, line) in read_lines(path, TOPIC_PAIR_HEADER)? {
        let mut it = line.split('\t');
        let (Some(item), Some(topic), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_error(path, line_no, "expected two fields"));
        };
        let topic: usize = topic
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad topic id {topic:?}")))?;
        pairs.push((item.to_string(), topic));
    }
    TopicAssignment::from_pairs(&pairs)
}

/// Embedding dump: `node<TAB>side<TAB>v0..`; artifact output for external
/// inspection and plotting.
pub fn write_embeddings(
    path: &Path,
    table: &EmbeddingTable,
    user_ids: &IdIndex,
    item_ids: &IdIndex,
) -> Result<()> {
    let mut out = String::from("node\tside");
    for k in 0..table.dim {
        write!(out, "\tv{k}").expect("string write");
    }
    out.push('\n');
    let mut emit = |id: &str, side: &str, vector: &[f64]| {
        write!(out, "{id}\t{side}").expect("string write");
        for v in vector {
            write!(out, "\t{v:.9e}").expect("string write");
        }
        out.push('\n');
    };
    for (u, vector) in table.user_vectors.iter().enumerate() {
        emit(user_ids.id_at(u).expect("valid index"), "user", vector);
    }
    for (i, vector) in table.item_vectors.iter().enumerate() {
        emit(item_ids.id_at(i).expect("valid index"), "item", vector);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_id_index(path: &Path, index: &IdIndex) -> Result<()> {
    let mut out = String::from(ID_INDEX_HEADER);
    out.push('\n');
    for (i, id) in index.iter().enumerate() {
        writeln!(out, "{id}\t{i}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_id_index(path: &Path) -> Result<IdIndex> {
    let mut rows: Vec<(String, usize)> = Vec::new();
    for (line_no, line) in read_lines(path, ID_INDEX_HEADER)? {
        let mut it = line.split('\t');
        let (Some(id), Some(idx), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_error(path, line_no, "expected two fields"));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad index {idx:?}")))?;
        rows.push((id.to_string(), idx));
    }
    rows.sort_by_key(|&(_, i)| i);
    for (want, &(_, got)) in rows.iter().enumerate() {
        if want != got {
            return Err(Error::Validation(format!(
                "{}: indices are not dense",
                path.display()
            )));
        }
    }
    Ok(IdIndex::from_ids(rows.iter().map(|(id, _)| id.as_str())))
}

/// Load report for the Yahoo! R3 loader.
#[derive(Debug, Clone)]
pub struct YahooData {
    pub train: InteractionTable,
    pub test: InteractionTable,
    pub train_users: usize,
    pub train_items: usize,
    pub train_ratings: usize,
    pub test_users: usize,
    pub test_items: usize,
    pub test_ratings: usize,
}

fn read_yahoo_file(path: &Path) -> Result<InteractionTable> {
    let content = fs::read_to_string(path)?;
    let mut table = InteractionTable::default();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        // Published mirrors vary between tab and space separation.
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(
                path,
                i + 1,
                format!("expected `user item rating`, got {line:?}"),
            ));
        }
        let rating: f64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, i + 1, format!("bad rating {:?}", fields[2])))?;
        if rating.fract() != 0.0 || !(RATING_MIN..=RATING_MAX).contains(&rating) {
            return Err(Error::Validation(format!(
                "{}:{}: rating {rating} not in {{1..5}}",
                path.display(),
                i + 1
            )));
        }
        table.push(fields[0], fields[1], rating);
    }
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(table)
}

/// Load the Yahoo! R3 split: a self-selected (MNAR) train file and a
/// uniformly-collected test file of whitespace-separated `user item rating`
/// triples. Counts are reported for sanity-checking against the published
/// 15,400 users x 1,000 items.
pub fn load_yahoo(train_path: &Path, test_path: &Path) -> Result<YahooData> {
    let train = read_yahoo_file(train_path)?;
    let test = read_yahoo_file(test_path)?;
    let (tu, ti) = train.index_maps()?;
    let (su, si) = test.index_maps()?;
    Ok(YahooData {
        train_users: tu.len(),
        train_items: ti.len(),
        train_ratings: train.len(),
        test_users: su.len(),
        test_items: si.len(),
        test_ratings: test.len(),
        train,
        test,
    })
}

/// Coat loader output: interactions from the dense rating matrix, item-level
/// propensities (loaded, or fit from covariates when absent), the native
/// multi-membership topic labels, and the raw covariate rows.
#[derive(Debug, Clone)]
pub struct CoatData {
    pub interactions: InteractionTable,
    pub item_propensities: PairPropensities,
    pub topics: TopicAssignment,
    pub covariates: Vec<Vec<f64>>,
    pub users: IdIndex,
    pub items: IdIndex,
    pub warnings: Vec<String>,
}

fn read_dense_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let content = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|f| {
                f.parse()
                    .map_err(|_| parse_error(path, i + 1, format!("bad value {f:?}")))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}

/// Load the Coat dataset: a dense user-by-item rating matrix (0 means
/// unobserved), an item-feature 0/1 matrix whose columns double as topic
/// labels and covariates, and optionally a dense propensity matrix. When no
/// propensity file is given, item-covariate logistic propensities are fit
/// from the observation pattern. `topic_columns` restricts which feature
/// columns count as topics (all by default).
pub fn load_coat(
    ratings_path: &Path,
    propensities_path: Option<&Path>,
    features_path: &Path,
    topic_columns: Option<std::ops::Range<usize>>,
) -> Result<CoatData> {
    let ratings = read_dense_matrix(ratings_path)?;
    let features = read_dense_matrix(features_path)?;
    let num_users = ratings.len();
    let num_items = ratings[0].len();
    let mut warnings = Vec::new();
    if (num_users, num_items) != (290, 300) {
        warnings.push(format!(
            "rating matrix is {num_users}x{num_items}, published Coat is 290x300"
        ));
    }
    if features.len() != num_items {
        return Err(Error::Validation(format!(
            "{} feature rows for {num_items} items",
            features.len()
        )));
    }

    let user_ids: Vec<String> = (0..num_users).map(|u| u.to_string()).collect();
    let item_ids: Vec<String> = (0..num_items).map(|i| i.to_string()).collect();
    let users = IdIndex::from_ids(user_ids.iter().map(String::as_str));
    let items = IdIndex::from_ids(item_ids.iter().map(String::as_str));

    let mut interactions = InteractionTable::default();
    let mut observed = vec![false; num_users * num_items];
    for u in 0..num_users {
        for i in 0..num_items {
            let value = ratings[u][i];
            if value == 0.0 {
                continue;
            }
            if !(RATING_MIN..=RATING_MAX).contains(&value) || value.fract() != 0.0 {
                return Err(Error::Validation(format!(
                    "{}: cell ({u},{i}) holds {value}, not in {{0..5}}",
                    ratings_path.display()
                )));
            }
            interactions.push(user_ids[u].clone(), item_ids[i].clone(), value);
            observed[u * num_items + i] = true;
        }
    }

    let topic_range = topic_columns.unwrap_or(0..features[0].len());
    let mut pairs = Vec::new();
    for (i, row) in features.iter().enumerate() {
        for c in topic_range.clone() {
            if row.get(c).copied().unwrap_or(0.0) != 0.0 {
                pairs.push((item_ids[i].clone(), c));
            }
        }
    }
    let topics = TopicAssignment::from_pairs(&pairs).map_err(|e| {
        Error::Validation(format!("deriving topics from feature columns: {e}"))
    })?;

    let item_propensities = match propensities_path {
        Some(path) => {
            let matrix = read_dense_matrix(path)?;
            if matrix.len() != num_users || matrix[0].len() != num_items {
                return Err(Error::Validation(format!(
                    "{}: propensity matrix shape mismatch",
                    path.display()
                )));
            }
            let mut rho = Vec::with_capacity(num_users * num_items);
            for row in &matrix {
                for &v in row {
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(Error::Validation(format!(
                            "{}: propensity {v} outside (0,1]",
                            path.display()
                        )));
                    }
                    rho.push(v);
                }
            }
            PairPropensities {
                users: users.clone(),
                items: items.clone(),
                rho,
            }
        }
        None => {
            let grid = ObservationGrid {
                users: users.clone(),
                items: items.clone(),
                observed,
            };
            let (props, _) = fit_logreg_propensities(&grid, &features, &LogRegConfig::default())?;
            props
        }
    };

    Ok(CoatData {
        interactions,
        item_propensities,
        topics,
        covariates: features,
        users,
        items,
        warnings,
    })
}

const MF_HEADER: &str = "pe-mf v1";
const EXPOMF_HEADER: &str = "pe-expomf v1";

fn write_row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        write!(out, "{v:.12e}").expect("string write");
        first = false;
    }
    out.push('\n');
}

/// Versioned plain-text factor model: header `pe-mf v1 <d> <U> <T>`, then
/// the global mean, user biases, topic biases, user factor rows, and topic
/// factor rows as whitespace-separated decimals.
pub fn save_factor_model(path: &Path, model: &FactorModel) -> Result<()> {
    let mut out = format!(
        "{MF_HEADER} {} {} {}\n",
        model.dim, model.num_users, model.num_topics
    );
    write_row(&mut out, &[model.global_mean]);
    write_row(&mut out, &model.user_bias);
    write_row(&mut out, &model.topic_bias);
    for u in 0..model.num_users {
        write_row(&mut out, model.user_row(u));
    }
    for t in 0..model.num_topics {
        write_row(&mut out, model.topic_row(t));
    }
    fs::write(path, out)?;
    Ok(())
}

struct TokenReader<'a> {
    path: &'a Path,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> TokenReader<'a> {
    fn take(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let tok = self.tokens.next().ok_or_else(|| {
                Error::Validation(format!("{}: truncated model file", self.path.display()))
            })?;
            out.push(tok.parse().map_err(|_| {
                Error::Validation(format!("{}: bad number {tok:?}", self.path.display()))
            })?);
        }
        Ok(out)
    }

    fn finish(mut self) -> Result<()> {
        if self.tokens.next().is_some() {
            return Err(Error::Validation(format!(
                "{}: trailing data after model body",
                self.path.display()
            )));
        }
        Ok(())
    }
}

fn parse_model_header(path: &Path, header: &str, magic: &str) -> Result<(usize, usize, usize)> {
    let rest = header
        .strip_prefix(magic)
        .ok_or_else(|| Error::Schema(header.to_string()))?;
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(|f| {
            f.parse()
                .map_err(|_| parse_error(path, 1, format!("bad dimension {f:?}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(parse_error(path, 1, "header needs `<d> <users> <topics>`"));
    }
    Ok((dims[0], dims[1], dims[2]))
}

pub fn load_factor_model(path: &Path) -> Result<FactorModel> {
    let content = fs::read_to_string(path)?;
    let (header, body) = content
        .split_once('\n')
        .ok_or_else(|| Error::Schema(content.clone()))?;
    let (dim, num_users, num_topics) = parse_model_header(path, header, MF_HEADER)?;
    let mut reader = TokenReader {
        path,
        tokens: body.split_whitespace(),
    };
    let global_mean = reader.take(1)?[0];
    let user_bias = reader.take(num_users)?;
    let topic_bias = reader.take(num_topics)?;
    let user_factors = reader.take(num_users * dim)?;
    let topic_factors = reader.take(num_topics * dim)?;
    reader.finish()?;
    Ok(FactorModel {
        num_users,
        num_topics,
        dim,
        user_factors,
        topic_factors,
        user_bias,
        topic_bias,
        global_mean,
    })
}

/// Exposure model file: header `pe-expomf v1 <d> <U> <T>`, the noise
/// precision, the per-topic exposure priors, then user and topic factor
/// rows. The per-cell posterior is a training artifact and is not persisted.
pub fn save_expomf_model(path: &Path, model: &ExpoMfModel) -> Result<()> {
    let mut out = format!(
        "{EXPOMF_HEADER} {} {} {}\n",
        model.dim, model.num_users, model.num_topics
    );
    write_row(&mut out, &[model.noise_precision]);
    write_row(&mut out, &model.exposure_prior);
    for u in 0..model.num_users {
        write_row(&mut out, &model.user_factors[u * model.dim..(u + 1) * model.dim]);
    }
    for t in 0..model.num_topics {
        write_row(
            &mut out,
            &model.topic_factors[t * model.dim..(t + 1) * model.dim],
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_expomf_model(path: &Path) -> Result<ExpoMfModel> {
    let content = fs::read_to_string(path)?;
    let (header, body) = content
        .split_once('\n')
        .ok_or_else(|| Error::Schema(content.clone()))?;
    let (dim, num_users, num_topics) = parse_model_header(path, header, EXPOMF_HEADER)?;
    let mut reader = TokenReader {
        path,
        tokens: body.split_whitespace(),
    };
    let noise_precision = reader.take(1)?[0];
    let exposure_prior = reader.take(num_topics)?;
    let user_factors = reader.take(num_users * dim)?;
    let topic_factors = reader.take(num_topics * dim)?;
    reader.finish()?;
    Ok(ExpoMfModel {
        num_users,
        num_topics,
        dim,
        user_factors,
        topic_factors,
        exposure_prior,
        noise_precision,
        exposure_posterior: Vec::new(),
    })
}

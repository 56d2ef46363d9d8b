//! Labeled data ingestion, train/test splitting, the logistic scorer and
//! the scored test set that every confusion vector is computed from.

use std::collections::HashMap;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label. Serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    fn as_f64(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    records: Vec<Record>,
    feature_dim: usize,
    feature_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset, checking that every record has the same width and
    /// that both classes occur.
    pub fn new(records: Vec<Record>, feature_names: Vec<String>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::validation("dataset has no usable rows"));
        };
        let feature_dim = first.features.len();
        if feature_dim == 0 {
            return Err(Error::validation("records have no features"));
        }
        if !feature_names.is_empty() && feature_names.len() != feature_dim {
            return Err(Error::validation(format!(
                "{} feature names for {feature_dim} features",
                feature_names.len()
            )));
        }
        if let Some(i) = records.iter().position(|r| r.features.len() != feature_dim) {
            return Err(Error::validation(format!(
                "record {i} has {} features, expected {feature_dim}",
                records[i].features.len()
            )));
        }
        let positives = records.iter().filter(|r| r.label.is_positive()).count();
        if positives == 0 || positives == records.len() {
            return Err(Error::validation(
                "dataset must contain both classes (found a single class)",
            ));
        }
        Ok(Self {
            records,
            feature_dim,
            feature_names,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_positive()).count()
    }
}

/// Column layout of a labeled CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub label_column: String,
    /// Columns ignored entirely, e.g. a sample ID.
    #[serde(default)]
    pub drop_columns: Vec<String>,
    /// Raw label value to class. Empty means the labels are already `0`/`1`.
    #[serde(default)]
    pub label_map: Vec<(String, Label)>,
}

impl CsvFormat {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            drop_columns: Vec::new(),
            label_map: Vec::new(),
        }
    }

    /// Layout of the UCI breast-cancer-wisconsin file: `class` is 2 (benign)
    /// or 4 (malignant), and the sample code is dropped.
    pub fn breast_cancer_wisconsin() -> Self {
        Self {
            label_column: "class".into(),
            drop_columns: vec!["sample_code_number".into()],
            label_map: vec![("2".into(), Label::Negative), ("4".into(), Label::Positive)],
        }
    }

    fn map_label(&self, raw: &str) -> Option<Label> {
        if self.label_map.is_empty() {
            return match raw {
                "0" => Some(Label::Negative),
                "1" => Some(Label::Positive),
                _ => None,
            };
        }
        self.label_map
            .iter()
            .find(|(k, _)| k == raw)
            .map(|&(_, label)| label)
    }
}

/// A loaded dataset plus how many rows were dropped for missing values.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: LabeledDataset,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads a headered CSV. Rows with a missing cell (`?` or empty) in any
/// used column are dropped and counted.
pub fn load_dataset<R: Read>(source: R, format: &CsvFormat) -> Result<Loaded> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == format.label_column)
        .ok_or_else(|| {
            Error::validation(format!(
                "label column `{}` not found; available columns: {}",
                format.label_column,
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    for dropped in &format.drop_columns {
        if !headers.iter().any(|h| h == dropped) {
            return Err(Error::validation(format!(
                "drop column `{dropped}` not found; available columns: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            )));
        }
    }
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && !format.drop_columns.iter().any(|d| d == &headers[i]))
        .collect();
    let feature_names = feature_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut records = Vec::new();
    let mut dropped_rows = 0;
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label_raw = &row[label_idx];
        if is_missing(label_raw) || feature_idx.iter().any(|&i| is_missing(&row[i])) {
            dropped_rows += 1;
            continue;
        }
        let label = format.map_label(label_raw).ok_or_else(|| Error::Parse {
            line,
            message: format!("unmapped label value `{label_raw}`"),
        })?;
        let features = feature_idx
            .iter()
            .map(|&i| {
                row[i].parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("column `{}`: `{}` is not a number", &headers[i], &row[i]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(Record { features, label });
    }
    let dataset = LabeledDataset::new(records, feature_names)?;
    Ok(Loaded {
        dataset,
        dropped_rows,
    })
}

const SPLIT_RETRIES: u64 = 64;

/// Shuffles by `seed` and cuts the dataset into halves (train gets the extra
/// record when the size is odd). Reshuffles while either half is
/// single-class.
pub fn split(dataset: &LabeledDataset, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let n = dataset.len();
    if n < 4 {
        return Err(Error::validation(format!(
            "need at least 4 records to split, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let cut = n.div_ceil(2);
    for _ in 0..SPLIT_RETRIES {
        order.shuffle(&mut rng);
        let half = |idx: &[usize]| -> Vec<Record> {
            idx.iter().map(|&i| dataset.records[i].clone()).collect()
        };
        let names = dataset.feature_names.clone();
        if let (Ok(train), Ok(test)) = (
            LabeledDataset::new(half(&order[..cut]), names.clone()),
            LabeledDataset::new(half(&order[cut..]), names),
        ) {
            return Ok((train, test));
        }
    }
    Err(Error::validation(format!(
        "could not split into two-class halves after {SPLIT_RETRIES} shuffles"
    )))
}

/// Anything that maps a feature vector to an estimate of P(Y = 1 | x).
pub trait Scorer {
    fn feature_dim(&self) -> usize;
    fn score(&self, features: &[f64]) -> f64;
}

/// Passes a single feature through unchanged. Used for data whose only
/// column already is a score.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityScorer;

impl Scorer for IdentityScorer {
    fn feature_dim(&self) -> usize {
        1
    }

    fn score(&self, features: &[f64]) -> f64 {
        features[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticScorer {
    /// Intercept first, then one weight per feature.
    pub weights: Vec<f64>,
    pub normalization: Vec<Normalization>,
}

impl LogisticScorer {
    fn linear(&self, features: &[f64]) -> f64 {
        self.weights[0]
            + self.weights[1..]
                .iter()
                .zip(features.iter().zip(&self.normalization))
                .map(|(w, (x, n))| w * (x - n.shift) / n.scale)
                .sum::<f64>()
    }
}

impl Scorer for LogisticScorer {
    fn feature_dim(&self) -> usize {
        self.normalization.len()
    }

    fn score(&self, features: &[f64]) -> f64 {
        sigmoid(self.linear(features))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub step_size: f64,
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Seed for the train/test split.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            l2: 1e-4,
            max_iter: 10_000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub scorer: LogisticScorer,
    pub iterations: usize,
    pub grad_norm: f64,
    /// False when `max_iter` ran out before the gradient norm fell below
    /// `tol`. The scorer is still usable for ranking.
    pub converged: bool,
}

/// Full-batch gradient descent on the L2-penalized mean log loss. The
/// intercept is not penalized.
pub fn fit_scorer(train: &LabeledDataset, config: &FitConfig) -> Result<FitOutcome> {
    // negated so NaN settings are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.step_size > 0.0) || !(config.l2 >= 0.0) || !(config.tol > 0.0) {
        return Err(Error::validation(format!("invalid fit config {config:?}")));
    }
    let n = train.len() as f64;
    let dim = train.feature_dim();

    let normalization: Vec<Normalization> = (0..dim)
        .map(|j| {
            let mean = train.records.iter().map(|r| r.features[j]).sum::<f64>() / n;
            let var = train
                .records
                .iter()
                .map(|r| (r.features[j] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            Normalization {
                shift: mean,
                scale: if sd > 0.0 { sd } else { 1.0 },
            }
        })
        .collect();
    let design: Vec<Vec<f64>> = train
        .records
        .iter()
        .map(|r| {
            r.features
                .iter()
                .zip(&normalization)
                .map(|(x, nm)| (x - nm.shift) / nm.scale)
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; dim + 1];
    let mut grad = vec![0.0; dim + 1];
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, r) in design.iter().zip(&train.records) {
            let z = weights[0] + weights[1..].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let residual = sigmoid(z) - r.label.as_f64();
            grad[0] += residual;
            for (g, v) in grad[1..].iter_mut().zip(x) {
                *g += residual * v;
            }
        }
        grad[0] /= n;
        for (g, w) in grad[1..].iter_mut().zip(&weights[1..]) {
            *g = *g / n + config.l2 * w;
        }
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < config.tol {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= config.step_size * g;
        }
        iterations += 1;
    }
    Ok(FitOutcome {
        scorer: LogisticScorer {
            weights,
            normalization,
        },
        iterations,
        grad_norm,
        converged: grad_norm < config.tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub score: f64,
    pub label: Label,
}

/// Test-set scores with labels, sorted by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScored")]
pub struct ScoredDataset {
    entries: Vec<ScoredEntry>,
    positives: usize,
    pi: f64,
}

#[derive(Deserialize)]
struct RawScored {
    entries: Vec<ScoredEntry>,
}

impl TryFrom<RawScored> for ScoredDataset {
    type Error = Error;

    fn try_from(raw: RawScored) -> Result<Self> {
        ScoredDataset::new(raw.entries)
    }
}

impl ScoredDataset {
    pub fn new(mut entries: Vec<ScoredEntry>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|e| !(0.0..=1.0).contains(&e.score)) {
            return Err(Error::validation(format!(
                "score {} outside [0, 1]",
                bad.score
            )));
        }
        let positives = entries.iter().filter(|e| e.label.is_positive()).count();
        if positives == 0 || positives == entries.len() {
            return Err(Error::validation(
                "scored set must contain both classes",
            ));
        }
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(b.label.cmp(&a.label)));
        let pi = positives as f64 / entries.len() as f64;
        Ok(Self {
            entries,
            positives,
            pi,
        })
    }

    /// Entries in descending score order.
    pub fn entries(&self) -> &[ScoredEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    pub fn negatives(&self) -> usize {
        self.entries.len() - self.positives
    }

    /// Fraction of positive labels.
    pub fn pi(&self) -> f64 {
        self.pi
    }

    /// ROC-AUC with ties counted as half, via one pass over the sorted
    /// entries.
    pub fn auc(&self) -> f64 {
        let mut wins = 0.0;
        let mut negatives_below = self.negatives() as f64;
        let mut i = 0;
        while i < self.entries.len() {
            let score = self.entries[i].score;
            let (mut pos, mut neg) = (0.0, 0.0);
            while i < self.entries.len() && self.entries[i].score == score {
                if self.entries[i].label.is_positive() {
                    pos += 1.0;
                } else {
                    neg += 1.0;
                }
                i += 1;
            }
            negatives_below -= neg;
            wins += pos * (negatives_below + 0.5 * neg);
        }
        wins / (self.positives as f64 * self.negatives() as f64)
    }
}

/// Scores every test record and sorts the result by descending score.
pub fn score_test<S: Scorer + ?Sized>(scorer: &S, test: &LabeledDataset) -> Result<ScoredDataset> {
    if scorer.feature_dim() != test.feature_dim() {
        return Err(Error::contract(format!(
            "scorer expects {} features, test set has {}",
            scorer.feature_dim(),
            test.feature_dim()
        )));
    }
    let entries = test
        .records
        .iter()
        .map(|r| ScoredEntry {
            score: scorer.score(&r.features),
            label: r.label,
        })
        .collect();
    ScoredDataset::new(entries)
}

/// Reads a pre-scored `score,label` CSV. Unlike [`load_dataset`], missing
/// cells are an error here.
pub fn load_scored<R: Read>(source: R) -> Result<ScoredDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let columns: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let (Some(&score_idx), Some(&label_idx)) = (columns.get("score"), columns.get("label")) else {
        return Err(Error::validation(format!(
            "pre-scored CSV needs `score` and `label` columns; found: {}",
            headers.iter().collect::<Vec<_>>().join(", ")
        )));
    };
    let mut entries = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let score = row[score_idx].parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("score `{}` is not a number", &row[score_idx]),
        })?;
        let label = match &row[label_idx] {
            "0" => Label::Negative,
            "1" => Label::Positive,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("label `{other}` is not 0 or 1"),
                })
            }
        };
        entries.push(ScoredEntry { score, label });
    }
    ScoredDataset::new(entries)
}

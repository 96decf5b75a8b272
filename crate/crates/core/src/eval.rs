//! Cross-validation, metrics and result rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    binary_items, majority_class, train_linear_weighted, LinearModel, RuleClassifier, SvmParams,
    WeightedItems,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::featsel::{
    average_size, document_transactions, DocTransactions, ItemSet, StrategySpec, TfidfIndex,
    Transaction,
};
use crate::rulemine::{
    generate_cars, rule_count_curve, tune, CurvePoint, MineConfig, Rule, DEFAULT_RULE_BUDGET,
};

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($name), " `{}` (expected one of: ", $($text, " ",)+ ")"),
                        other
                    ))),
                }
            }
        }
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Car,
    Svm,
}

keyword_enum!(ClassifierKind { Car => "car", Svm => "svm" });

impl ClassifierKind {
    fn row_label(self) -> &'static str {
        match self {
            ClassifierKind::Car => "CAR",
            ClassifierKind::Svm => "SVM",
        }
    }
}

/// Unit that receives a prediction and a gold label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalLevel {
    Sentence,
    #[default]
    Document,
}

keyword_enum!(EvalLevel { Sentence => "sentence", Document => "document" });

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    Macro,
    /// Weighted by gold support.
    #[default]
    Weighted,
}

keyword_enum!(Average { Macro => "macro", Weighted => "weighted" });

/// Feature values seen by the SVM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmFeatures {
    /// 1 for every item of the transaction.
    #[default]
    Binary,
    /// The item's tf-idf in its sentence.
    Tfidf,
}

keyword_enum!(SvmFeatures { Binary => "binary", Tfidf => "tfidf" });

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    PaperTable,
    Csv,
    Json,
}

keyword_enum!(Layout { PaperTable => "table", Csv => "csv", Json => "json" });

/// Cap on mined itemset size.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaxItemsetSize {
    /// 4 for the all-nouns strategies or when transactions average more
    /// than 7 items, otherwise unbounded.
    #[default]
    Auto,
    Unbounded,
    Limit(usize),
}

impl MaxItemsetSize {
    pub fn resolve(self, spec: StrategySpec, avg_transaction_size: f64) -> Option<usize> {
        match self {
            MaxItemsetSize::Unbounded => None,
            MaxItemsetSize::Limit(n) => Some(n),
            MaxItemsetSize::Auto => {
                let wide = matches!(
                    spec,
                    StrategySpec::HeadAllNouns | StrategySpec::HeadAllNounsVerbs
                );
                (wide || avg_transaction_size > 7.0).then_some(4)
            }
        }
    }
}

impl fmt::Display for MaxItemsetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxItemsetSize::Auto => f.write_str("auto"),
            MaxItemsetSize::Unbounded => f.write_str("unbounded"),
            MaxItemsetSize::Limit(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for MaxItemsetSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(MaxItemsetSize::Auto),
            "unbounded" => Ok(MaxItemsetSize::Unbounded),
            n => match n.parse::<usize>() {
                Ok(n) if n > 0 => Ok(MaxItemsetSize::Limit(n)),
                _ => Err(Error::InvalidArgument(format!(
                    "max itemset size `{s}` must be auto, unbounded or a positive integer"
                ))),
            },
        }
    }
}

impl TryFrom<String> for MaxItemsetSize {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaxItemsetSize> for String {
    fn from(m: MaxItemsetSize) -> String {
        m.to_string()
    }
}

pub fn default_support_grid() -> Vec<f64> {
    vec![
        0.001, 0.002, 0.003, 0.005, 0.007, 0.01, 0.015, 0.02, 0.03, 0.05, 0.07, 0.1,
    ]
}

/// 0.40 to 0.70 in steps of 0.02.
pub fn default_confidence_grid() -> Vec<f64> {
    (0..16).map(|i| (40 + 2 * i) as f64 / 100.0).collect()
}

/// Experiment settings other than the corpus, strategy and fold plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub level: EvalLevel,
    pub rule_budget: usize,
    /// Fixes σ instead of tuning it.
    pub min_support: Option<f64>,
    /// Fixes κ instead of tuning it.
    pub min_confidence: Option<f64>,
    pub support_grid: Vec<f64>,
    pub confidence_grid: Vec<f64>,
    pub max_itemset_size: MaxItemsetSize,
    /// Share of each class's training documents held out for tuning.
    pub holdout_fraction: f64,
    /// F average maximized by tuning and reported by sweeps.
    pub average: Average,
    pub svm: SvmParams,
    pub svm_features: SvmFeatures,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            level: EvalLevel::Document,
            rule_budget: DEFAULT_RULE_BUDGET,
            min_support: None,
            min_confidence: None,
            support_grid: default_support_grid(),
            confidence_grid: default_confidence_grid(),
            max_itemset_size: MaxItemsetSize::Auto,
            holdout_fraction: 0.2,
            average: Average::Weighted,
            svm: SvmParams::default(),
            svm_features: SvmFeatures::Binary,
        }
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Assignment of documents to cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Document ids in corpus order.
    pub documents: Vec<String>,
    /// Fold of each document, aligned with `documents`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, document: &str) -> Option<usize> {
        self.documents
            .iter()
            .position(|d| d == document)
            .map(|i| self.assignment[i])
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    fn check(&self, corpus: &Corpus) -> Result<()> {
        let aligned = self.documents.len() == corpus.documents.len()
            && self
                .documents
                .iter()
                .zip(&corpus.documents)
                .all(|(a, b)| *a == b.id);
        if !aligned || self.assignment.len() != self.documents.len() {
            return Err(Error::InvalidArgument(
                "fold plan does not match the corpus".into(),
            ));
        }
        if self.assignment.iter().any(|&f| f >= self.k) {
            return Err(Error::InvalidArgument(
                "fold plan assigns a fold index ≥ k".into(),
            ));
        }
        Ok(())
    }
}

/// Fold index per label. Stratified: classes in lexicographic order, each
/// shuffled, then dealt round-robin with the offset carried across classes.
fn assign_folds(labels: &[&str], k: usize, seed: u64, stratified: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let groups: Vec<Vec<usize>> = if stratified {
        let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        by_class.into_values().collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            assignment[i] = next % k;
            next += 1;
        }
    }
    assignment
}

pub fn kfold_split(corpus: &Corpus, k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    let labels: Vec<&str> = corpus.documents.iter().map(|d| d.label.as_str()).collect();
    if stratified {
        for class in &corpus.classes {
            let count = labels.iter().filter(|l| **l == class).count();
            if count < k {
                return Err(Error::TooFewDocuments {
                    class: class.clone(),
                    count,
                    folds: k,
                });
            }
        }
    } else if labels.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} documents cannot fill {k} folds",
            labels.len()
        )));
    }
    Ok(FoldPlan {
        k,
        seed,
        stratified,
        documents: corpus.documents.iter().map(|d| d.id.clone()).collect(),
        assignment: assign_folds(&labels, k, seed, stratified),
    })
}

/// Splits `indices` into (train, holdout), holding out about `fraction` of
/// each class. Classes with a single member stay in train.
fn holdout_split(
    indices: &[usize],
    labels: &[&str],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        by_class.entry(labels[i]).or_default().push(i);
    }
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for mut group in by_class.into_values() {
        group.shuffle(&mut rng);
        let n = group.len();
        let h = if n < 2 {
            0
        } else {
            ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
        };
        held.extend_from_slice(&group[..h]);
        train.extend_from_slice(&group[h..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: usize,
    pub predicted: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub classifier: Option<ClassifierKind>,
    pub min_support: Option<f64>,
    pub min_confidence: Option<f64>,
    pub avg_transaction_size: Option<f64>,
    pub abstention_rate: Option<f64>,
    pub level: Option<EvalLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// In column order.
    pub classes: Vec<ClassScores>,
    pub macro_avg: Summary,
    pub weighted_avg: Summary,
    /// `confusion[gold][predicted]`, indexed in column order.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub annotations: Annotations,
}

impl Metrics {
    pub fn average(&self, average: Average) -> &Summary {
        match average {
            Average::Macro => &self.macro_avg,
            Average::Weighted => &self.weighted_avg,
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassScores> {
        self.classes.iter().find(|c| c.class == name)
    }

    /// Builds per-class scores and averages from a confusion matrix.
    pub fn from_confusion<S: AsRef<str>>(
        classes: &[S],
        confusion: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = classes.len();
        if confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square over the classes".into(),
            ));
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let total: usize = confusion.iter().flatten().sum();
        let mut scores = Vec::with_capacity(n);
        for (c, name) in classes.iter().enumerate() {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            scores.push(ClassScores {
                class: name.as_ref().to_owned(),
                precision,
                recall,
                f1,
                support,
                predicted,
            });
        }
        let macro_avg = if n == 0 {
            Summary::default()
        } else {
            let m = n as f64;
            Summary {
                precision: scores.iter().map(|s| s.precision).sum::<f64>() / m,
                recall: scores.iter().map(|s| s.recall).sum::<f64>() / m,
                f1: scores.iter().map(|s| s.f1).sum::<f64>() / m,
            }
        };
        let weighted_avg = if total == 0 {
            Summary::default()
        } else {
            let w = |f: fn(&ClassScores) -> f64| {
                scores.iter().map(|s| f(s) * s.support as f64).sum::<f64>() / total as f64
            };
            Summary {
                precision: w(|s| s.precision),
                recall: w(|s| s.recall),
                f1: w(|s| s.f1),
            }
        };
        let correct: usize = (0..n).map(|c| confusion[c][c]).sum();
        Ok(Metrics {
            classes: scores,
            macro_avg,
            weighted_avg,
            accuracy: ratio(correct, total),
            confusion,
            annotations: Annotations::default(),
        })
    }
}

/// Per-class precision, recall and F1 with macro and weighted averages.
/// A class that is never predicted has precision 0.
pub fn compute_metrics<S: AsRef<str>, T: AsRef<str>>(
    gold: &[S],
    predicted: &[S],
    classes: &[T],
) -> Result<Metrics> {
    if gold.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_ref(), i))
        .collect();
    let lookup = |label: &str| {
        index
            .get(label)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("label `{label}` is not a known class")))
    };
    let mut confusion = vec![vec![0; classes.len()]; classes.len()];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Metrics::from_confusion(classes, confusion)
}

/// One predicted unit: a document, or a sentence at sentence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub document: String,
    /// 1-based sentence number at sentence level.
    pub sentence: Option<usize>,
    pub fold: usize,
    pub gold: String,
    pub predicted: String,
    pub abstained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_transactions: usize,
    pub min_support: Option<f64>,
    pub min_confidence: Option<f64>,
    pub rules: Option<usize>,
    /// Holdout score of the chosen point, when tuned.
    pub tuning_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub strategy: String,
    pub metrics: Metrics,
    pub folds: Vec<FoldReport>,
    pub predictions: Vec<PredictionRecord>,
}

struct Unit<'a> {
    doc: usize,
    sentence: Option<usize>,
    gold: &'a str,
    items: Vec<&'a ItemSet>,
}

fn units<'a>(docs: &'a [DocTransactions], indices: &[usize], level: EvalLevel) -> Vec<Unit<'a>> {
    let mut out = Vec::new();
    for &i in indices {
        let d = &docs[i];
        match level {
            EvalLevel::Document => out.push(Unit {
                doc: i,
                sentence: None,
                gold: &d.class,
                items: d.transactions.iter().map(|t| &t.items).collect(),
            }),
            EvalLevel::Sentence => out.extend(d.transactions.iter().map(|t| Unit {
                doc: i,
                sentence: t.source.as_ref().map(|s| s.sentence),
                gold: &d.class,
                items: vec![&t.items],
            })),
        }
    }
    out
}

fn transactions_of(docs: &[DocTransactions], indices: &[usize]) -> Vec<Transaction> {
    indices
        .iter()
        .flat_map(|&i| docs[i].transactions.iter().cloned())
        .collect()
}

/// (predicted class, abstained) per unit.
fn predict_car(rc: &RuleClassifier, units: &[Unit<'_>]) -> Vec<(String, bool)> {
    units
        .iter()
        .map(|u| {
            let p = rc.classify_document(u.items.iter().copied());
            (p.class, p.abstained)
        })
        .collect()
}

/// Document margins are summed over sentences; a unit with no items gets
/// the bias-only decision and counts as abstained.
fn predict_svm(model: &LinearModel, inputs: &[Vec<&WeightedItems>]) -> Vec<(String, bool)> {
    inputs
        .iter()
        .map(|sentences| {
            if sentences.is_empty() {
                return (model.class_of(&model.biases).to_owned(), true);
            }
            let mut total = vec![0.0; model.classes.len()];
            for items in sentences {
                for (acc, m) in total.iter_mut().zip(model.margins(items)) {
                    *acc += m;
                }
            }
            (model.class_of(&total).to_owned(), false)
        })
        .collect()
}

/// SVM input vectors, parallel to `DocTransactions::transactions`.
fn svm_vectors(
    corpus: &Corpus,
    docs: &[DocTransactions],
    features: SvmFeatures,
) -> Vec<Vec<WeightedItems>> {
    let index = (features == SvmFeatures::Tfidf).then(|| TfidfIndex::new(corpus, corpus.tau));
    docs.iter()
        .zip(&corpus.documents)
        .map(|(d, doc)| {
            d.transactions
                .iter()
                .map(|t| match (&index, &t.source) {
                    (Some(index), Some(src)) => {
                        let sentence = &doc.sentences[src.sentence - 1];
                        let scores: BTreeMap<_, _> = index
                            .ranked(sentence)
                            .into_iter()
                            .map(|f| (f.feature, f.tfidf))
                            .collect();
                        t.items
                            .iter()
                            .map(|f| (f.clone(), scores.get(f).copied().unwrap_or(0.0)))
                            .collect()
                    }
                    _ => binary_items(&t.items),
                })
                .collect()
        })
        .collect()
}

/// Per-unit SVM inputs, in the order of [`units`].
fn svm_units<'a>(
    vectors: &'a [Vec<WeightedItems>],
    indices: &[usize],
    level: EvalLevel,
) -> Vec<Vec<&'a WeightedItems>> {
    let mut out = Vec::new();
    for &i in indices {
        match level {
            EvalLevel::Document => out.push(vectors[i].iter().collect()),
            EvalLevel::Sentence => out.extend(vectors[i].iter().map(|v| vec![v])),
        }
    }
    out
}

fn score_units(
    units: &[Unit<'_>],
    predicted: &[(String, bool)],
    classes: &[String],
    average: Average,
) -> f64 {
    let gold: Vec<&str> = units.iter().map(|u| u.gold).collect();
    let pred: Vec<&str> = predicted.iter().map(|(c, _)| c.as_str()).collect();
    compute_metrics(&gold, &pred, classes)
        .map(|m| m.average(average).f1)
        .unwrap_or(0.0)
}

/// Rule scorer over held-out units, for tuning and curves.
fn car_scorer<'a>(
    units: &'a [Unit<'a>],
    classes: &'a [String],
    fallback: &'a str,
    average: Average,
) -> impl Fn(&[Rule]) -> f64 + Sync + 'a {
    move |rules: &[Rule]| match RuleClassifier::new(rules.to_vec(), classes, fallback) {
        Ok(rc) => score_units(units, &predict_car(&rc, units), classes, average),
        Err(_) => 0.0,
    }
}

struct FoldOutput {
    report: FoldReport,
    records: Vec<(usize, PredictionRecord)>,
}

struct Context<'a> {
    corpus: &'a Corpus,
    docs: &'a [DocTransactions],
    /// SVM inputs; empty for CAR runs.
    vectors: Vec<Vec<WeightedItems>>,
    max_size: Option<usize>,
    cfg: &'a EvalConfig,
    plan: &'a FoldPlan,
}

impl Context<'_> {
    fn fold_indices(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.docs.len()).partition(|&i| self.plan.assignment[i] != fold)
    }

    fn classes(&self) -> &[String] {
        &self.corpus.classes
    }

    /// (σ, κ, holdout score) for one fold's training documents.
    fn tune_car(&self, fold: usize, train_idx: &[usize]) -> Result<(f64, f64, Option<f64>)> {
        let cfg = self.cfg;
        if let (Some(s), Some(c)) = (cfg.min_support, cfg.min_confidence) {
            return Ok((s, c, None));
        }
        let labels: Vec<&str> = self.docs.iter().map(|d| d.class.as_str()).collect();
        let (mut inner, mut held) = holdout_split(
            train_idx,
            &labels,
            cfg.holdout_fraction,
            mix(self.plan.seed, 1000 + fold as u64),
        );
        if inner.is_empty() || held.is_empty() {
            inner = train_idx.to_vec();
            held = train_idx.to_vec();
        }
        let inner_tx = transactions_of(self.docs, &inner);
        if inner_tx.is_empty() {
            return Err(Error::EmptyStrategyOutput);
        }
        let held_units = units(self.docs, &held, cfg.level);
        let fallback = majority_class(&inner_tx).expect("non-empty");
        let support_grid = cfg
            .min_support
            .map_or_else(|| cfg.support_grid.clone(), |s| vec![s]);
        let confidence_grid = cfg
            .min_confidence
            .map_or_else(|| cfg.confidence_grid.clone(), |c| vec![c]);
        let scorer = car_scorer(&held_units, self.classes(), &fallback, cfg.average);
        let t = tune(
            &inner_tx,
            cfg.rule_budget,
            &support_grid,
            &confidence_grid,
            self.max_size,
            scorer,
        )?;
        Ok((t.min_support, t.min_confidence, Some(t.score)))
    }

    fn run_fold(&self, clf: ClassifierKind, fold: usize) -> Result<FoldOutput> {
        let (train_idx, test_idx) = self.fold_indices(fold);
        let train_tx = transactions_of(self.docs, &train_idx);
        if train_tx.is_empty() {
            return Err(Error::EmptyStrategyOutput);
        }
        let test_units = units(self.docs, &test_idx, self.cfg.level);
        let mut report = FoldReport {
            fold,
            train_transactions: train_tx.len(),
            min_support: None,
            min_confidence: None,
            rules: None,
            tuning_score: None,
        };
        let predicted = match clf {
            ClassifierKind::Car => {
                let (s, c, score) = self.tune_car(fold, &train_idx)?;
                let rules = generate_cars(
                    &train_tx,
                    &MineConfig {
                        min_support: s,
                        min_confidence: c,
                        rule_budget: self.cfg.rule_budget,
                        max_itemset_size: self.max_size,
                    },
                )?;
                report.min_support = Some(s);
                report.min_confidence = Some(c);
                report.rules = Some(rules.len());
                report.tuning_score = score;
                let fallback = majority_class(&train_tx).expect("non-empty");
                let rc = RuleClassifier::new(rules, self.classes(), &fallback)?;
                predict_car(&rc, &test_units)
            }
            ClassifierKind::Svm => {
                let params = SvmParams {
                    seed: mix(self.cfg.svm.seed, fold as u64),
                    ..self.cfg.svm.clone()
                };
                let examples: Vec<(WeightedItems, &str)> = train_idx
                    .iter()
                    .flat_map(|&i| {
                        let class = self.docs[i].class.as_str();
                        self.vectors[i].iter().map(move |v| (v.clone(), class))
                    })
                    .collect();
                let model = train_linear_weighted(&examples, self.classes(), &params)?;
                let inputs = svm_units(&self.vectors, &test_idx, self.cfg.level);
                predict_svm(&model, &inputs)
            }
        };
        let records = test_units
            .iter()
            .zip(predicted)
            .map(|(u, (class, abstained))| {
                (
                    u.doc,
                    PredictionRecord {
                        document: self.docs[u.doc].document.clone(),
                        sentence: u.sentence,
                        fold,
                        gold: u.gold.to_owned(),
                        predicted: class,
                        abstained,
                    },
                )
            })
            .collect();
        Ok(FoldOutput { report, records })
    }
}

/// Most frequent value, larger value on ties.
fn mode(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for v in values {
        counts.entry(v.to_bits()).or_insert((v, 0)).1 += 1;
    }
    counts
        .into_values()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.total_cmp(&b.0)))
        .map(|(v, _)| v)
}

/// Cross-validated run: per fold, build transactions from the training
/// documents, tune σ and κ on a holdout of them (CAR) or train the SVM,
/// then predict the test documents. Predictions are pooled over folds.
pub fn run_experiment(
    corpus: &Corpus,
    spec: StrategySpec,
    clf: ClassifierKind,
    cfg: &EvalConfig,
    plan: &FoldPlan,
) -> Result<Experiment> {
    plan.check(corpus)?;
    if corpus.classes.len() < 2 {
        return Err(Error::SingleClass(
            corpus.classes.first().cloned().unwrap_or_default(),
        ));
    }
    let docs = document_transactions(corpus, spec, corpus.tau);
    let all: Vec<&Transaction> = docs.iter().flat_map(|d| &d.transactions).collect();
    if all.is_empty() {
        return Err(Error::EmptyStrategyOutput);
    }
    let avg = all.iter().map(|t| t.items.len()).sum::<usize>() as f64 / all.len() as f64;
    let vectors = match clf {
        ClassifierKind::Svm => svm_vectors(corpus, &docs, cfg.svm_features),
        ClassifierKind::Car => Vec::new(),
    };
    let ctx = Context {
        corpus,
        docs: &docs,
        vectors,
        max_size: cfg.max_itemset_size.resolve(spec, avg),
        cfg,
        plan,
    };
    let outputs: Vec<FoldOutput> = (0..plan.k)
        .into_par_iter()
        .map(|f| ctx.run_fold(clf, f))
        .collect::<Result<_>>()?;

    let mut records: Vec<(usize, PredictionRecord)> = Vec::new();
    let mut folds = Vec::with_capacity(outputs.len());
    for out in outputs {
        records.extend(out.records);
        folds.push(out.report);
    }
    records.sort_by_key(|(doc, r)| (*doc, r.sentence));
    let predictions: Vec<PredictionRecord> = records.into_iter().map(|(_, r)| r).collect();

    let gold: Vec<&str> = predictions.iter().map(|r| r.gold.as_str()).collect();
    let pred: Vec<&str> = predictions.iter().map(|r| r.predicted.as_str()).collect();
    let mut metrics = compute_metrics(&gold, &pred, &corpus.classes)?;
    let abstained = predictions.iter().filter(|r| r.abstained).count();
    metrics.annotations = Annotations {
        classifier: Some(clf),
        min_support: mode(folds.iter().filter_map(|f| f.min_support)),
        min_confidence: mode(folds.iter().filter_map(|f| f.min_confidence)),
        avg_transaction_size: Some(avg),
        abstention_rate: Some(if predictions.is_empty() {
            0.0
        } else {
            abstained as f64 / predictions.len() as f64
        }),
        level: Some(cfg.level),
    };
    Ok(Experiment {
        strategy: spec.to_string(),
        metrics,
        folds,
        predictions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub f1: f64,
}

/// One experiment per N with the tf-idf top-N strategy.
pub fn sweep_tfidf_n(
    corpus: &Corpus,
    clf: ClassifierKind,
    cfg: &EvalConfig,
    n_range: &[usize],
    plan: &FoldPlan,
) -> Result<Vec<SweepPoint>> {
    n_range
        .iter()
        .map(|&n| {
            let e = run_experiment(corpus, StrategySpec::TfidfTopN(n), clf, cfg, plan)?;
            Ok(SweepPoint {
                n,
                f1: e.metrics.average(cfg.average).f1,
            })
        })
        .collect()
}

/// Rule count and F along a support sweep at fixed κ. Rules are mined on
/// every fold but `eval_fold`, which is scored.
pub fn rule_count_sweep(
    corpus: &Corpus,
    spec: StrategySpec,
    cfg: &EvalConfig,
    plan: &FoldPlan,
    eval_fold: usize,
    min_confidence: f64,
    support_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    plan.check(corpus)?;
    if eval_fold >= plan.k {
        return Err(Error::InvalidArgument(format!(
            "fold {eval_fold} is out of range"
        )));
    }
    let docs = document_transactions(corpus, spec, corpus.tau);
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..docs.len()).partition(|&i| plan.assignment[i] != eval_fold);
    let train_tx = transactions_of(&docs, &train_idx);
    if train_tx.is_empty() {
        return Err(Error::EmptyStrategyOutput);
    }
    let max_size = cfg.max_itemset_size.resolve(spec, average_size(&train_tx));
    let test_units = units(&docs, &test_idx, cfg.level);
    let fallback = majority_class(&train_tx).expect("non-empty");
    let scorer = car_scorer(&test_units, &corpus.classes, &fallback, cfg.average);
    rule_count_curve(
        &train_tx,
        min_confidence,
        support_grid,
        cfg.rule_budget,
        max_size,
        scorer,
    )
}

pub fn tfidf_curve_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("tfidf_n,f_measure\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.n, p.f1));
    }
    out
}

pub fn rule_curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("min_support,rule_count,f_measure\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.min_support, p.rule_count, p.score));
    }
    out
}

type Score = fn(&ClassScores) -> f64;
type SummaryScore = fn(&Summary) -> f64;

fn percent(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Fixed decimals with trailing zeros trimmed.
fn trimmed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Annotation line of a table block, or `None` without tuned thresholds.
fn annotation_line(a: &Annotations) -> Option<String> {
    if a.min_support.is_none() && a.min_confidence.is_none() {
        return None;
    }
    let mut parts = Vec::new();
    if let Some(s) = a.min_support {
        parts.push(format!("MinSupp={}", trimmed(s, 6)));
    }
    if let Some(c) = a.min_confidence {
        parts.push(format!("MinConf={}", trimmed(c * 100.0, 2)));
    }
    if let Some(t) = a.avg_transaction_size {
        parts.push(format!("AvgTransSize={t:.2}"));
    }
    Some(parts.join(", "))
}

fn paper_table(blocks: &[Metrics], average: Average) -> String {
    let mut out = String::new();
    let Some(first) = blocks.first() else {
        return out;
    };
    let width = first.classes.len() + 1;
    for c in &first.classes {
        out.push('\t');
        out.push_str(&c.class);
    }
    out.push_str("\tAVG\n");
    for m in blocks {
        let label = m
            .annotations
            .classifier
            .map(|c| format!("{} ", c.row_label()))
            .unwrap_or_default();
        let avg = m.average(average);
        let rows: [(&str, Score, f64); 3] = [
            ("Recall", |c| c.recall, avg.recall),
            ("Precision", |c| c.precision, avg.precision),
            ("F-measure", |c| c.f1, avg.f1),
        ];
        for (name, get, mean) in rows {
            out.push_str(&label);
            out.push_str(name);
            for c in &m.classes {
                out.push('\t');
                out.push_str(&percent(get(c)));
            }
            out.push('\t');
            out.push_str(&percent(mean));
            out.push('\n');
        }
        if let Some(line) = annotation_line(&m.annotations) {
            out.push_str(&line);
            out.push_str(&"\t".repeat(width));
            out.push('\n');
        }
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_table(blocks: &[Metrics]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let classes: Vec<&str> = blocks
        .first()
        .map(|m| m.classes.iter().map(|c| c.class.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec!["classifier", "metric"];
    header.extend(&classes);
    header.extend([
        "macro",
        "weighted",
        "min_support",
        "min_confidence",
        "avg_transaction_size",
        "abstention_rate",
        "level",
    ]);
    w.write_record(&header).expect("write to memory");
    for m in blocks {
        let a = &m.annotations;
        let rows: [(&str, Score, SummaryScore); 3] = [
            ("recall", |c| c.recall, |s| s.recall),
            ("precision", |c| c.precision, |s| s.precision),
            ("f1", |c| c.f1, |s| s.f1),
        ];
        for (name, get, avg) in rows {
            let mut rec = vec![opt(a.classifier), name.to_owned()];
            rec.extend(m.classes.iter().map(|c| get(c).to_string()));
            rec.push(avg(&m.macro_avg).to_string());
            rec.push(avg(&m.weighted_avg).to_string());
            rec.push(opt(a.min_support));
            rec.push(opt(a.min_confidence));
            rec.push(opt(a.avg_transaction_size));
            rec.push(opt(a.abstention_rate));
            rec.push(opt(a.level));
            w.write_record(&rec).expect("write to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

/// Renders one or more metric blocks. The text table prints the `average`
/// in its AVG column; CSV and JSON carry both averages.
pub fn emit_table(blocks: &[Metrics], layout: Layout, average: Average) -> String {
    match layout {
        Layout::PaperTable => paper_table(blocks, average),
        Layout::Csv => csv_table(blocks),
        Layout::Json => {
            let mut s = serde_json::to_string_pretty(blocks).expect("metrics serialize");
            s.push('\n');
            s
        }
    }
}

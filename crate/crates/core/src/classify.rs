//! Sentence and document classifiers.
//!
//! [`RuleClassifier`] sums the confidences of the rules a sentence matches
//! and sums sentence scores into a document vote. [`LinearModel`] is a
//! one-vs-rest linear SVM trained with Pegasos-style stochastic subgradient
//! steps on the hinge loss.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Feature;
use crate::error::{Error, Result};
use crate::featsel::{ItemSet, Transaction};
use crate::rulemine::{rule_order, Rule};

/// Index of the largest score; the first (lexicographically smallest class)
/// wins ties.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn sorted_classes<S: AsRef<str>>(classes: &[S]) -> Vec<String> {
    classes
        .iter()
        .map(|c| c.as_ref().to_owned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Most frequent class among transactions, smallest name on ties.
pub fn majority_class(transactions: &[Transaction]) -> Option<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in transactions {
        *counts.entry(t.class.as_str()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(c, _)| c.to_owned())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Class score = sum of the confidences of the matched rules.
    #[default]
    ConfSum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: String,
    /// One score per class, in class order.
    pub scores: Vec<f64>,
    /// No rule matched (or, for documents, no sentence voted).
    pub abstained: bool,
}

#[derive(Clone, Debug)]
pub struct RuleClassifier {
    rules: Vec<Rule>,
    classes: Vec<String>,
    fallback: String,
    aggregation: Aggregation,
    feature_ids: HashMap<Feature, u32>,
    /// Rules containing each feature id.
    postings: Vec<Vec<u32>>,
    rule_len: Vec<u32>,
    rule_class: Vec<usize>,
}

impl RuleClassifier {
    pub fn new<S: AsRef<str>>(mut rules: Vec<Rule>, classes: &[S], fallback: &str) -> Result<Self> {
        let classes = sorted_classes(classes);
        let class_of = |c: &str| {
            classes
                .binary_search_by(|x| x.as_str().cmp(c))
                .map_err(|_| {
                    Error::InvalidArgument(format!("class `{c}` is not among the known classes"))
                })
        };
        class_of(fallback)?;
        rules.sort_by(rule_order);
        let mut feature_ids: HashMap<Feature, u32> = HashMap::new();
        let mut postings: Vec<Vec<u32>> = Vec::new();
        let mut rule_len = Vec::with_capacity(rules.len());
        let mut rule_class = Vec::with_capacity(rules.len());
        for (r, rule) in rules.iter().enumerate() {
            if rule.items.is_empty() {
                return Err(Error::InvalidArgument("rule with an empty itemset".into()));
            }
            rule_class.push(class_of(&rule.class)?);
            let distinct: BTreeSet<&Feature> = rule.items.iter().collect();
            rule_len.push(distinct.len() as u32);
            for f in distinct {
                let next = feature_ids.len() as u32;
                let id = *feature_ids.entry(f.clone()).or_insert(next);
                if id as usize == postings.len() {
                    postings.push(Vec::new());
                }
                postings[id as usize].push(r as u32);
            }
        }
        Ok(RuleClassifier {
            rules,
            classes,
            fallback: fallback.to_owned(),
            aggregation: Aggregation::ConfSum,
            feature_ids,
            postings,
            rule_len,
            rule_class,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn fallback(&self) -> &str {
        &self.fallback
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    fn matched_indices(&self, items: &ItemSet) -> Vec<usize> {
        let mut hits: HashMap<u32, u32> = HashMap::new();
        for f in items {
            if let Some(&id) = self.feature_ids.get(f) {
                for &r in &self.postings[id as usize] {
                    *hits.entry(r).or_insert(0) += 1;
                }
            }
        }
        let mut matched: Vec<usize> = hits
            .into_iter()
            .filter(|&(r, n)| n == self.rule_len[r as usize])
            .map(|(r, _)| r as usize)
            .collect();
        matched.sort_unstable();
        matched
    }

    /// Rules whose itemset is contained in `items`, in global rule order.
    pub fn match_rules(&self, items: &ItemSet) -> Vec<&Rule> {
        self.matched_indices(items)
            .into_iter()
            .map(|r| &self.rules[r])
            .collect()
    }

    pub fn classify_sentence(&self, items: &ItemSet) -> Prediction {
        let mut scores = vec![0.0; self.classes.len()];
        let matched = self.matched_indices(items);
        match self.aggregation {
            Aggregation::ConfSum => {
                for &r in &matched {
                    scores[self.rule_class[r]] += self.rules[r].confidence;
                }
            }
        }
        if matched.is_empty() {
            return Prediction {
                class: self.fallback.clone(),
                scores,
                abstained: true,
            };
        }
        Prediction {
            class: self.classes[argmax(&scores)].clone(),
            scores,
            abstained: false,
        }
    }

    /// Weighted vote: document score per class is the sum of the
    /// non-abstaining sentence scores.
    pub fn classify_document<'a, I>(&self, sentences: I) -> Prediction
    where
        I: IntoIterator<Item = &'a ItemSet>,
    {
        let mut scores = vec![0.0; self.classes.len()];
        let mut voted = false;
        for items in sentences {
            let p = self.classify_sentence(items);
            if p.abstained {
                continue;
            }
            voted = true;
            for (acc, s) in scores.iter_mut().zip(&p.scores) {
                *acc += s;
            }
        }
        if !voted {
            return Prediction {
                class: self.fallback.clone(),
                scores,
                abstained: true,
            };
        }
        Prediction {
            class: self.classes[argmax(&scores)].clone(),
            scores,
            abstained: false,
        }
    }
}

/// Linear SVM hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// L2 regularization strength (Pegasos λ).
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

/// A sparse training or test example: feature values, missing means 0.
pub type WeightedItems = Vec<(Feature, f64)>;

pub fn binary_items(items: &ItemSet) -> WeightedItems {
    items.iter().map(|f| (f.clone(), 1.0)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub vocabulary: Vec<Feature>,
    pub classes: Vec<String>,
    /// `weights[c][j]` for class c and vocabulary entry j.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub params: SvmParams,
    index: HashMap<Feature, usize>,
}

impl LinearModel {
    pub fn from_parts(
        vocabulary: Vec<Feature>,
        classes: Vec<String>,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        params: SvmParams,
    ) -> Result<Self> {
        if weights.len() != classes.len() || biases.len() != classes.len() {
            return Err(Error::InvalidArgument(
                "one weight vector and bias per class required".into(),
            ));
        }
        if weights.iter().any(|w| w.len() != vocabulary.len()) {
            return Err(Error::InvalidArgument(
                "weight vector length differs from vocabulary size".into(),
            ));
        }
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        Ok(LinearModel {
            vocabulary,
            classes,
            weights,
            biases,
            params,
            index,
        })
    }

    /// Margin per class for a weighted example; unseen features are ignored.
    pub fn margins(&self, items: &[(Feature, f64)]) -> Vec<f64> {
        let x: Vec<(usize, f64)> = items
            .iter()
            .filter_map(|(f, v)| self.index.get(f).map(|&j| (j, *v)))
            .collect();
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| x.iter().map(|&(j, v)| w[j] * v).sum::<f64>() + b)
            .collect()
    }

    pub fn predict_weighted(&self, items: &[(Feature, f64)]) -> (String, Vec<f64>) {
        let m = self.margins(items);
        (self.classes[argmax(&m)].clone(), m)
    }

    pub fn class_of(&self, margins: &[f64]) -> &str {
        &self.classes[argmax(margins)]
    }
}

/// Class of maximum margin on the binary presence vector of `items`.
pub fn predict_linear(items: &ItemSet, model: &LinearModel) -> (String, Vec<f64>) {
    model.predict_weighted(&binary_items(items))
}

pub fn train_linear<S: AsRef<str>>(
    train: &[Transaction],
    classes: &[S],
    params: &SvmParams,
) -> Result<LinearModel> {
    let examples: Vec<(WeightedItems, &str)> = train
        .iter()
        .map(|t| (binary_items(&t.items), t.class.as_str()))
        .collect();
    train_linear_weighted(&examples, classes, params)
}

/// One-vs-rest training on weighted examples. The bias is learned as the
/// weight of a constant feature and is regularized with the rest.
pub fn train_linear_weighted<S: AsRef<str>>(
    examples: &[(WeightedItems, &str)],
    classes: &[S],
    params: &SvmParams,
) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::NoTransactions);
    }
    if params.lambda.is_nan() || params.lambda <= 0.0 || params.epochs == 0 {
        return Err(Error::InvalidArgument(
            "SVM needs lambda > 0 and at least one epoch".into(),
        ));
    }
    let classes = sorted_classes(classes);
    let present: BTreeSet<&str> = examples.iter().map(|(_, c)| *c).collect();
    if let Some(c) = present
        .iter()
        .find(|c| classes.binary_search_by(|x| x.as_str().cmp(c)).is_err())
    {
        return Err(Error::InvalidArgument(format!(
            "class `{c}` is not among the known classes"
        )));
    }
    if present.len() < 2 {
        return Err(Error::SingleClass(
            present.into_iter().next().unwrap_or_default().to_owned(),
        ));
    }

    let vocabulary: Vec<Feature> = examples
        .iter()
        .flat_map(|(x, _)| x.iter().map(|(f, _)| f))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let index: HashMap<&Feature, usize> =
        vocabulary.iter().enumerate().map(|(i, f)| (f, i)).collect();
    let dim = vocabulary.len();
    // Constant bias feature sits at `dim`.
    let rows: Vec<Vec<(usize, f64)>> = examples
        .iter()
        .map(|(x, _)| {
            let mut row: Vec<(usize, f64)> = x.iter().map(|(f, v)| (index[f], *v)).collect();
            row.push((dim, 1.0));
            row
        })
        .collect();
    let labels: Vec<usize> = examples
        .iter()
        .map(|(_, c)| {
            classes
                .binary_search_by(|x| x.as_str().cmp(c))
                .expect("checked above")
        })
        .collect();

    let trained: Vec<Vec<f64>> = (0..classes.len())
        .into_par_iter()
        .map(|c| pegasos(&rows, &labels, c, dim + 1, params))
        .collect();
    let (weights, biases) = trained
        .into_iter()
        .map(|mut w| {
            let b = w.pop().expect("bias slot");
            (w, b)
        })
        .unzip();
    LinearModel::from_parts(vocabulary, classes, weights, biases, params.clone())
}

/// Binary hinge-loss Pegasos for `class` against the rest.
fn pegasos(
    rows: &[Vec<(usize, f64)>],
    labels: &[usize],
    class: usize,
    dim: usize,
    params: &SvmParams,
) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(params.seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..rows.len()).collect();
    // w = scale * v keeps the shrink step O(1) on sparse rows.
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let y = if labels[i] == class { 1.0 } else { -1.0 };
            let dot: f64 = rows[i].iter().map(|&(j, x)| v[j] * x).sum();
            let margin = y * scale * dot;
            scale *= 1.0 - eta * params.lambda;
            if scale <= 1e-9 {
                if scale == 0.0 {
                    v.iter_mut().for_each(|x| *x = 0.0);
                } else {
                    v.iter_mut().for_each(|x| *x *= scale);
                }
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for &(j, x) in &rows[i] {
                    v[j] += step * x;
                }
            }
        }
    }
    v.into_iter().map(|x| x * scale).collect()
}

const MODEL_MAGIC: &str = "depcar-linear-model";
const MODEL_VERSION: u32 = 1;

/// Versioned flat text: header lines, the vocabulary one feature per line,
/// then one `weights` line per class.
pub fn write_model(model: &LinearModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC} v{MODEL_VERSION}");
    let _ = writeln!(out, "lambda\t{}", model.params.lambda);
    let _ = writeln!(out, "epochs\t{}", model.params.epochs);
    let _ = writeln!(out, "seed\t{}", model.params.seed);
    let _ = writeln!(out, "classes\t{}", model.classes.join("\t"));
    let _ = writeln!(out, "vocabulary\t{}", model.vocabulary.len());
    for f in &model.vocabulary {
        let _ = writeln!(out, "{f}");
    }
    for ((class, w), b) in model.classes.iter().zip(&model.weights).zip(&model.biases) {
        let _ = write!(out, "weights\t{class}\t{b}");
        for x in w {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    }
    out
}

pub fn read_model(text: &str, file: &str) -> Result<LinearModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(file, 0, what, "unexpected end of model file"))
    };
    let (n, magic) = next("header")?;
    if magic != format!("{MODEL_MAGIC} v{MODEL_VERSION}") {
        return Err(Error::parse(
            file,
            n,
            "header",
            format!("unsupported model header `{magic}`"),
        ));
    }
    let keyed = |(n, line): (usize, &str), key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('\t'))
            .map(str::to_owned)
            .ok_or_else(|| Error::parse(file, n, key, format!("expected `{key}` line")))
    };
    let float = |n: usize, field: &str, v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::parse(file, n, field, format!("`{v}` is not a number")))
    };
    let l = next("lambda")?;
    let lambda = float(l.0, "lambda", &keyed(l, "lambda")?)?;
    let l = next("epochs")?;
    let epochs = keyed(l, "epochs")?
        .parse()
        .map_err(|_| Error::parse(file, l.0, "epochs", "not an integer"))?;
    let l = next("seed")?;
    let seed = keyed(l, "seed")?
        .parse()
        .map_err(|_| Error::parse(file, l.0, "seed", "not an integer"))?;
    let l = next("classes")?;
    let classes: Vec<String> = keyed(l, "classes")?
        .split('\t')
        .map(str::to_owned)
        .collect();
    let l = next("vocabulary")?;
    let size: usize = keyed(l, "vocabulary")?
        .parse()
        .map_err(|_| Error::parse(file, l.0, "vocabulary", "not an integer"))?;
    let mut vocabulary = Vec::with_capacity(size);
    for _ in 0..size {
        let (n, line) = next("vocabulary")?;
        vocabulary.push(
            line.parse::<Feature>()
                .map_err(|e| Error::parse(file, n, "vocabulary", e.to_string()))?,
        );
    }
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for class in &classes {
        let l = next("weights")?;
        let rest = keyed(l, "weights")?;
        let mut cols = rest.split('\t');
        if cols.next() != Some(class.as_str()) {
            return Err(Error::parse(
                file,
                l.0,
                "weights",
                format!("expected weights for `{class}`"),
            ));
        }
        let b = float(l.0, "bias", cols.next().unwrap_or_default())?;
        let w = cols
            .map(|v| float(l.0, "weight", v))
            .collect::<Result<Vec<f64>>>()?;
        weights.push(w);
        biases.push(b);
    }
    LinearModel::from_parts(
        vocabulary,
        classes,
        weights,
        biases,
        SvmParams {
            lambda,
            epochs,
            seed,
        },
    )
    .map_err(|e| Error::parse(file, 0, "weights", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Feature {
        format!("n:{s}").parse().unwrap()
    }

    fn set(items: &[&str]) -> ItemSet {
        items.iter().map(|s| f(s)).collect()
    }

    fn rule(items: &[&str], class: &str, confidence: f64) -> Rule {
        Rule {
            items: items.iter().map(|s| f(s)).collect(),
            class: class.into(),
            support: 0.1,
            confidence,
        }
    }

    #[test]
    fn matching_is_subset_test() {
        let rc = RuleClassifier::new(vec![rule(&["b"], "c1", 1.0)], &["c1", "c2"], "c2").unwrap();
        assert_eq!(rc.match_rules(&set(&["a", "b"])).len(), 1);
        assert!(rc.match_rules(&set(&["a"])).is_empty());
    }

    #[test]
    fn confidence_sum_decides() {
        let rc = RuleClassifier::new(
            vec![rule(&["b"], "c1", 1.0), rule(&["a"], "c2", 0.5)],
            &["c1", "c2"],
            "c2",
        )
        .unwrap();
        let p = rc.classify_sentence(&set(&["a", "b"]));
        assert_eq!(p.class, "c1");
        assert_eq!(p.scores, vec![1.0, 0.5]);
        assert!(!p.abstained);
    }

    #[test]
    fn abstention_and_ties() {
        let rc = RuleClassifier::new(
            vec![rule(&["a"], "c2", 0.7), rule(&["b"], "c1", 0.7)],
            &["c2", "c1"],
            "c2",
        )
        .unwrap();
        let p = rc.classify_sentence(&set(&["z"]));
        assert_eq!(p.class, "c2");
        assert!(p.abstained);
        assert_eq!(p.scores, vec![0.0, 0.0]);

        let p = rc.classify_sentence(&set(&["a", "b"]));
        assert_eq!(p.class, "c1");
    }

    #[test]
    fn document_vote() {
        // Sentence scores: c1 2.0, c1 0.5, c2 1.0.
        let rc = RuleClassifier::new(
            vec![
                rule(&["x"], "c1", 1.0),
                rule(&["x", "y"], "c1", 1.0),
                rule(&["w"], "c1", 0.5),
                rule(&["v"], "c2", 1.0),
            ],
            &["c1", "c2"],
            "c2",
        )
        .unwrap();
        let sents = [set(&["x", "y"]), set(&["w"]), set(&["v"])];
        let p = rc.classify_document(&sents);
        assert_eq!(p.class, "c1");
        assert_eq!(p.scores, vec![2.5, 1.0]);

        let single = [set(&["v"])];
        assert_eq!(
            rc.classify_document(&single).class,
            rc.classify_sentence(&single[0]).class
        );

        let none = [set(&["q"]), set(&["r"])];
        let p = rc.classify_document(&none);
        assert!(p.abstained);
        assert_eq!(p.class, "c2");
    }

    #[test]
    fn rejects_unknown_classes() {
        assert!(RuleClassifier::new(vec![], &["a"], "b").is_err());
        assert!(RuleClassifier::new(vec![rule(&["x"], "z", 1.0)], &["a"], "a").is_err());
    }

    fn separable() -> Vec<Transaction> {
        let mut t = Vec::new();
        for i in 0..60 {
            let class = ["c1", "c2", "c3"][i % 3];
            let marker = format!("m{}", i % 3);
            let noise = format!("z{}", i % 7);
            t.push(Transaction::new(set(&[&marker, &noise, "common"]), class));
        }
        t
    }

    #[test]
    fn svm_separates_markers() {
        let t = separable();
        let m = train_linear(&t, &["c1", "c2", "c3"], &SvmParams::default()).unwrap();
        let correct = t
            .iter()
            .filter(|x| predict_linear(&x.items, &m).0 == x.class)
            .count();
        assert!(correct as f64 / t.len() as f64 >= 0.99);
        assert_eq!(predict_linear(&set(&["m1"]), &m).0, "c2");
    }

    #[test]
    fn svm_deterministic_and_round_trips() {
        let t = separable();
        let p = SvmParams {
            seed: 7,
            ..SvmParams::default()
        };
        let a = train_linear(&t, &["c1", "c2", "c3"], &p).unwrap();
        let b = train_linear(&t, &["c1", "c2", "c3"], &p).unwrap();
        assert_eq!(a, b);
        let text = write_model(&a);
        let back = read_model(&text, "m").unwrap();
        assert_eq!(back, a);
        assert_eq!(write_model(&back), text);
    }

    #[test]
    fn svm_empty_and_unseen_use_bias() {
        let t = separable();
        let m = train_linear(&t, &["c1", "c2", "c3"], &SvmParams::default()).unwrap();
        let expected = m.classes[argmax(&m.biases)].clone();
        assert_eq!(predict_linear(&ItemSet::new(), &m).0, expected);
        assert_eq!(predict_linear(&set(&["never-seen"]), &m).0, expected);
        assert_eq!(predict_linear(&ItemSet::new(), &m).1, m.biases);
    }

    #[test]
    fn svm_single_class_is_error() {
        let t = vec![Transaction::new(set(&["a"]), "c1")];
        assert!(matches!(
            train_linear(&t, &["c1", "c2"], &SvmParams::default()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn svm_no_signal_falls_to_majority() {
        let mut t = Vec::new();
        for i in 0..40 {
            let class = if i % 4 == 0 { "b" } else { "a" };
            t.push(Transaction::new(set(&["same"]), class));
        }
        let m = train_linear(&t, &["a", "b"], &SvmParams::default()).unwrap();
        let acc = t
            .iter()
            .filter(|x| predict_linear(&x.items, &m).0 == x.class)
            .count() as f64
            / 40.0;
        assert!((acc - 0.75).abs() < 1e-9, "{acc}");
    }

    #[test]
    fn majority_ties_to_smaller_name() {
        let t = vec![
            Transaction::new(set(&["a"]), "z"),
            Transaction::new(set(&["a"]), "b"),
        ];
        assert_eq!(majority_class(&t).as_deref(), Some("b"));
    }
}

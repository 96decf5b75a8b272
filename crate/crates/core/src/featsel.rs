//! Sentence-to-itemset feature selection.
//!
//! Two families: tf-idf ranking inside a sentence (keep the N best), and
//! dependency-tree strategies that keep the head and/or nouns by their
//! distance from the head.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{make_feature, Corpus, Cpos, Feature, Sentence, Tau, Token};
use crate::error::{Error, Result};

pub type ItemSet = BTreeSet<Feature>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategySpec {
    /// The N highest tf-idf features of the sentence.
    TfidfTopN(usize),
    /// The head alone, when it is a noun, proper noun or verb.
    HeadOnly,
    /// Nouns and proper nouns directly governed by the head.
    NounsDist1,
    /// The head plus nouns and proper nouns within the given distance.
    HeadPlusNouns(usize),
    /// The head plus every noun and proper noun.
    HeadAllNouns,
    /// The head plus every noun, proper noun and verb.
    HeadAllNounsVerbs,
}

impl StrategySpec {
    /// The dependency strategies in nesting order (excluding `HeadOnly`).
    pub fn dependency_chain() -> [StrategySpec; 6] {
        [
            StrategySpec::NounsDist1,
            StrategySpec::HeadPlusNouns(1),
            StrategySpec::HeadPlusNouns(2),
            StrategySpec::HeadPlusNouns(3),
            StrategySpec::HeadAllNouns,
            StrategySpec::HeadAllNounsVerbs,
        ]
    }

    pub fn uses_tfidf(&self) -> bool {
        matches!(self, StrategySpec::TfidfTopN(_))
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::TfidfTopN(n) => write!(f, "tfidf:{n}"),
            StrategySpec::HeadOnly => f.write_str("head-only"),
            StrategySpec::NounsDist1 => f.write_str("nouns-dist1"),
            StrategySpec::HeadPlusNouns(d) => write!(f, "head-nouns:{d}"),
            StrategySpec::HeadAllNouns => f.write_str("head-all-nouns"),
            StrategySpec::HeadAllNounsVerbs => f.write_str("head-all-nouns-verbs"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = Error;

    /// Accepts the canonical names printed by `Display` and the roman
    /// shorthands `I`, `II`, `III1`..`III3`, `IV`, `IV'`.
    fn from_str(s: &str) -> Result<Self> {
        let positive = |v: &str| -> Result<usize> {
            match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::InvalidArgument(format!(
                    "strategy `{s}`: `{v}` is not a positive integer"
                ))),
            }
        };
        if let Some(n) = s.strip_prefix("tfidf:") {
            return Ok(StrategySpec::TfidfTopN(positive(n)?));
        }
        if let Some(d) = s.strip_prefix("head-nouns:") {
            return Ok(StrategySpec::HeadPlusNouns(positive(d)?));
        }
        if let Some(d) = s.strip_prefix("III") {
            return Ok(StrategySpec::HeadPlusNouns(positive(d)?));
        }
        match s {
            "head-only" | "I" => Ok(StrategySpec::HeadOnly),
            "nouns-dist1" | "II" => Ok(StrategySpec::NounsDist1),
            "head-all-nouns" | "IV" => Ok(StrategySpec::HeadAllNouns),
            "head-all-nouns-verbs" | "IV'" | "IVp" => Ok(StrategySpec::HeadAllNounsVerbs),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy `{other}`"
            ))),
        }
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a transaction came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Source {
    pub document: String,
    /// 1-based sentence number within the document.
    pub sentence: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub items: ItemSet,
    pub class: String,
    pub source: Option<Source>,
}

impl Transaction {
    pub fn new(items: impl IntoIterator<Item = Feature>, class: impl Into<String>) -> Self {
        Transaction {
            items: items.into_iter().collect(),
            class: class.into(),
            source: None,
        }
    }
}

/// Sentence frequencies of every feature over a corpus, for idf.
#[derive(Clone, Debug)]
pub struct TfidfIndex {
    tau: Tau,
    num_sentences: usize,
    sentence_freq: HashMap<Feature, usize>,
}

/// A distinct feature of one sentence with its in-sentence count and score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredFeature {
    pub feature: Feature,
    pub count: usize,
    pub tfidf: f64,
}

impl TfidfIndex {
    pub fn new(corpus: &Corpus, tau: Tau) -> Self {
        let mut sentence_freq: HashMap<Feature, usize> = HashMap::new();
        let mut num_sentences = 0;
        for s in corpus.sentences() {
            num_sentences += 1;
            let distinct: BTreeSet<Feature> =
                s.tokens.iter().map(|t| make_feature(t, tau)).collect();
            for f in distinct {
                *sentence_freq.entry(f).or_insert(0) += 1;
            }
        }
        TfidfIndex {
            tau,
            num_sentences,
            sentence_freq,
        }
    }

    pub fn num_sentences(&self) -> usize {
        self.num_sentences
    }

    pub fn sentence_frequency(&self, feature: &Feature) -> usize {
        self.sentence_freq.get(feature).copied().unwrap_or(0)
    }

    fn score(&self, count: usize, sentence_len: usize, feature: &Feature) -> f64 {
        // A feature absent from the indexed corpus counts as seen once.
        let df = self.sentence_frequency(feature).max(1);
        let tf = count as f64 / sentence_len as f64;
        tf * (self.num_sentences as f64 / df as f64).ln()
    }

    /// tf-idf of `token` within `sentence`.
    pub fn tfidf(&self, token: &Token, sentence: &Sentence) -> f64 {
        let target = make_feature(token, self.tau);
        let count = sentence
            .tokens
            .iter()
            .filter(|t| make_feature(t, self.tau) == target)
            .count();
        self.score(count, sentence.len(), &target)
    }

    /// Distinct features of a sentence, best first: tf-idf descending, then
    /// in-sentence count descending, then feature order.
    pub fn ranked(&self, sentence: &Sentence) -> Vec<ScoredFeature> {
        let mut counts: HashMap<Feature, usize> = HashMap::new();
        for t in &sentence.tokens {
            *counts.entry(make_feature(t, self.tau)).or_insert(0) += 1;
        }
        let mut scored: Vec<ScoredFeature> = counts
            .into_iter()
            .map(|(feature, count)| ScoredFeature {
                tfidf: self.score(count, sentence.len(), &feature),
                feature,
                count,
            })
            .collect();
        scored.sort_by(|a, b| {
            b.tfidf
                .total_cmp(&a.tfidf)
                .then_with(|| b.count.cmp(&a.count))
                .then_with(|| a.feature.cmp(&b.feature))
        });
        scored
    }

    pub fn top_n(&self, sentence: &Sentence, n: usize) -> ItemSet {
        self.ranked(sentence)
            .into_iter()
            .take(n)
            .map(|s| s.feature)
            .collect()
    }
}

/// `(count of τ(w) in τ(s) / |s|) · ln(|C| / |{S ∈ C : τ(w) ∈ τ(S)}|)`,
/// with sentences as the idf unit.
pub fn tfidf(token: &Token, sentence: &Sentence, corpus: &Corpus, tau: Tau) -> f64 {
    TfidfIndex::new(corpus, tau).tfidf(token, sentence)
}

pub fn select_tfidf_top_n(sentence: &Sentence, corpus: &Corpus, n: usize, tau: Tau) -> ItemSet {
    TfidfIndex::new(corpus, tau).top_n(sentence, n)
}

/// Number of edges between the sentence head and the token at `position`
/// (0-based). `None` when the token does not reach the head.
pub fn depth_from_head(sentence: &Sentence, position: usize) -> Option<usize> {
    sentence.depths().get(position).copied().flatten()
}

/// Applies one selection strategy to sentences of a fixed corpus.
#[derive(Clone, Debug)]
pub struct Extractor {
    spec: StrategySpec,
    tau: Tau,
    tfidf: Option<TfidfIndex>,
}

impl Extractor {
    pub fn new(corpus: &Corpus, spec: StrategySpec, tau: Tau) -> Self {
        let tfidf = spec.uses_tfidf().then(|| TfidfIndex::new(corpus, tau));
        Extractor { spec, tau, tfidf }
    }

    pub fn spec(&self) -> StrategySpec {
        self.spec
    }

    pub fn extract(&self, sentence: &Sentence) -> ItemSet {
        if let (StrategySpec::TfidfTopN(n), Some(index)) = (self.spec, &self.tfidf) {
            return index.top_n(sentence, n);
        }
        let Some(head_pos) = sentence.root_index() else {
            return ItemSet::new();
        };
        let depths = sentence.depths();
        let mut items = ItemSet::new();
        let head = &sentence.tokens[head_pos];
        let head_kept = matches!(head.cpos, Cpos::N | Cpos::Np | Cpos::V);

        let (with_head, max_depth, verbs) = match self.spec {
            StrategySpec::HeadOnly => (true, Some(0), false),
            StrategySpec::NounsDist1 => (false, Some(1), false),
            StrategySpec::HeadPlusNouns(d) => (true, Some(d), false),
            StrategySpec::HeadAllNouns => (true, None, false),
            StrategySpec::HeadAllNounsVerbs => (true, None, true),
            StrategySpec::TfidfTopN(_) => unreachable!("tf-idf handled above"),
        };
        if with_head && head_kept {
            items.insert(make_feature(head, self.tau));
        }
        for (pos, t) in sentence.tokens.iter().enumerate() {
            if pos == head_pos {
                continue;
            }
            let Some(depth) = depths[pos] else { continue };
            let in_range = match (self.spec, max_depth) {
                (StrategySpec::NounsDist1, _) => depth == 1,
                (_, Some(max)) => depth >= 1 && depth <= max,
                (_, None) => true,
            };
            let wanted = t.cpos.is_nominal() || (verbs && t.cpos == Cpos::V);
            if in_range && wanted {
                items.insert(make_feature(t, self.tau));
            }
        }
        items
    }
}

pub fn extract_strategy(
    sentence: &Sentence,
    spec: StrategySpec,
    corpus: &Corpus,
    tau: Tau,
) -> ItemSet {
    Extractor::new(corpus, spec, tau).extract(sentence)
}

/// The non-empty transactions of one document.
#[derive(Clone, Debug)]
pub struct DocTransactions {
    pub document: String,
    pub class: String,
    pub transactions: Vec<Transaction>,
    /// Sentences whose strategy output was empty.
    pub skipped: usize,
}

/// Per-document transactions, in corpus order. Documents whose sentences
/// all yield empty itemsets are kept with no transactions.
pub fn document_transactions(
    corpus: &Corpus,
    spec: StrategySpec,
    tau: Tau,
) -> Vec<DocTransactions> {
    let extractor = Extractor::new(corpus, spec, tau);
    corpus
        .documents
        .par_iter()
        .map(|doc| {
            let mut transactions = Vec::with_capacity(doc.sentences.len());
            let mut skipped = 0;
            for (i, s) in doc.sentences.iter().enumerate() {
                let items = extractor.extract(s);
                if items.is_empty() {
                    skipped += 1;
                    continue;
                }
                transactions.push(Transaction {
                    items,
                    class: doc.label.clone(),
                    source: Some(Source {
                        document: doc.id.clone(),
                        sentence: i + 1,
                    }),
                });
            }
            DocTransactions {
                document: doc.id.clone(),
                class: doc.label.clone(),
                transactions,
                skipped,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TransactionSet {
    pub transactions: Vec<Transaction>,
    pub avg_transaction_size: f64,
    pub skipped: usize,
}

impl TransactionSet {
    pub fn from_documents(docs: &[DocTransactions]) -> Result<Self> {
        let transactions: Vec<Transaction> = docs
            .iter()
            .flat_map(|d| d.transactions.iter().cloned())
            .collect();
        if transactions.is_empty() {
            return Err(Error::EmptyStrategyOutput);
        }
        Ok(TransactionSet {
            avg_transaction_size: average_size(&transactions),
            skipped: docs.iter().map(|d| d.skipped).sum(),
            transactions,
        })
    }
}

pub fn average_size(transactions: &[Transaction]) -> f64 {
    if transactions.is_empty() {
        return 0.0;
    }
    let total: usize = transactions.iter().map(|t| t.items.len()).sum();
    total as f64 / transactions.len() as f64
}

/// One transaction per sentence with a non-empty itemset.
pub fn corpus_to_transactions(
    corpus: &Corpus,
    spec: StrategySpec,
    tau: Tau,
) -> Result<TransactionSet> {
    TransactionSet::from_documents(&document_transactions(corpus, spec, tau))
}

/// `<class>TAB<item>TAB<item>...` per line, items in feature order.
pub fn write_transactions(transactions: &[Transaction]) -> String {
    let mut out = String::new();
    for t in transactions {
        out.push_str(&t.class);
        for item in &t.items {
            out.push('\t');
            out.push_str(&item.to_string());
        }
        out.push('\n');
    }
    out
}

/// Reads a transaction dump. `#` lines are comments.
pub fn parse_transactions(text: &str, file: &str) -> Result<Vec<Transaction>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let class = cols.next().unwrap_or_default();
        if class.is_empty() {
            return Err(Error::parse(file, line_no, "class", "empty class"));
        }
        let items = cols
            .map(|c| {
                c.parse::<Feature>()
                    .map_err(|e| Error::parse(file, line_no, "item", e.to_string()))
            })
            .collect::<Result<ItemSet>>()?;
        if items.is_empty() {
            return Err(Error::parse(
                file,
                line_no,
                "item",
                "transaction has no items",
            ));
        }
        out.push(Transaction {
            items,
            class: class.to_owned(),
            source: None,
        });
    }
    Ok(out)
}

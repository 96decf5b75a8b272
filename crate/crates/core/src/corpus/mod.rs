//! Dependency-annotated, labeled corpora.
//!
//! A [`Corpus`] is a list of [`Document`]s, each holding one or more
//! dependency-parsed [`Sentence`]s. Tokens carry both a light stem and an
//! optional consonantal root; [`make_feature`] turns a token into the
//! [`Feature`] used as a transaction item under the chosen [`Tau`] mode.

mod format;
mod overlap;
mod pos;
mod validate;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use format::{load_corpus, parse_corpus, read_corpus, write_native, Format};
pub use overlap::{root_overlap_report, OverlapCell, OverlapReport};
pub use pos::{map_fine_pos, PosTable};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};

/// Marker prepended to a root when it is rendered as a feature.
pub const ROOT_MARK: char = '√';

/// Simplified part-of-speech tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cpos {
    /// Common noun.
    N,
    /// Proper noun.
    Np,
    /// Verb.
    V,
    /// Everything else.
    X,
}

impl Cpos {
    pub fn as_str(self) -> &'static str {
        match self {
            Cpos::N => "n",
            Cpos::Np => "np",
            Cpos::V => "v",
            Cpos::X => "x",
        }
    }

    pub fn is_nominal(self) -> bool {
        matches!(self, Cpos::N | Cpos::Np)
    }
}

impl fmt::Display for Cpos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cpos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "n" => Ok(Cpos::N),
            "np" => Ok(Cpos::Np),
            "v" => Ok(Cpos::V),
            "x" => Ok(Cpos::X),
            other => Err(Error::InvalidArgument(format!("unknown cpos `{other}`"))),
        }
    }
}

/// How a token is reduced before it becomes a feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tau {
    Stem,
    Root,
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tau::Stem => "stem",
            Tau::Root => "root",
        })
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stem" => Ok(Tau::Stem),
            "root" => Ok(Tau::Root),
            other => Err(Error::InvalidArgument(format!(
                "unknown tau mode `{other}` (expected stem or root)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub stem: String,
    /// Consonantal root without the √ mark; absent for foreign words.
    pub root: Option<String>,
    pub cpos: Cpos,
    pub fpos: String,
    /// Index of the governing token, 0 for the sentence head.
    pub head: usize,
    pub deprel: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based position of the first token whose head is 0.
    pub fn root_index(&self) -> Option<usize> {
        self.tokens.iter().position(|t| t.head == 0)
    }

    pub fn head_token(&self) -> Option<&Token> {
        self.root_index().map(|i| &self.tokens[i])
    }

    /// Distance (in edges) of every token from the sentence head, indexed by
    /// 0-based position. `None` marks tokens that do not reach the head,
    /// which only happens on sentences that fail validation.
    pub fn depths(&self) -> Vec<Option<usize>> {
        let n = self.tokens.len();
        let mut depth: Vec<Option<usize>> = vec![None; n];
        for start in 0..n {
            if depth[start].is_some() {
                continue;
            }
            // Climb until a known depth or the head, then unwind.
            let mut path = Vec::new();
            let mut cur = start;
            let base = loop {
                if let Some(d) = depth[cur] {
                    break Some(d);
                }
                if path.len() > n {
                    break None;
                }
                path.push(cur);
                let head = self.tokens[cur].head;
                if head == 0 {
                    break Some(usize::MAX);
                }
                if head > n || head - 1 == cur {
                    break None;
                }
                cur = head - 1;
            };
            let Some(base) = base else { continue };
            let mut d = base;
            for &p in path.iter().rev() {
                d = d.wrapping_add(1);
                depth[p] = Some(d);
            }
        }
        depth
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub label: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Distinct document labels, lexicographically ordered.
    pub classes: Vec<String>,
    pub tau: Tau,
}

impl Corpus {
    /// Builds a corpus whose class set is derived from the document labels.
    pub fn new(documents: Vec<Document>, tau: Tau) -> Self {
        let classes: BTreeSet<&str> = documents.iter().map(|d| d.label.as_str()).collect();
        let classes = classes.into_iter().map(str::to_owned).collect();
        Corpus {
            documents,
            classes,
            tau,
        }
    }

    pub fn num_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(class))
            .ok()
    }
}

/// A transaction item: a coarse POS tag paired with a stem or a root.
///
/// Serialized as `cpos:text`, with a √ before `text` when it is a root.
/// Ordering follows the byte order of that serialization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Feature {
    pub cpos: Cpos,
    pub text: String,
    pub is_root: bool,
}

impl Feature {
    pub fn new(cpos: Cpos, text: impl Into<String>, is_root: bool) -> Self {
        Feature {
            cpos,
            text: text.into(),
            is_root,
        }
    }

    pub fn stem(cpos: Cpos, text: impl Into<String>) -> Self {
        Feature::new(cpos, text, false)
    }

    pub fn root(cpos: Cpos, text: impl Into<String>) -> Self {
        Feature::new(cpos, text, true)
    }

    fn serialized_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        let mark: &'static [u8] = if self.is_root { "√".as_bytes() } else { &[] };
        self.cpos
            .as_str()
            .bytes()
            .chain(std::iter::once(b':'))
            .chain(mark.iter().copied())
            .chain(self.text.bytes())
    }
}

impl Ord for Feature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.serialized_bytes().cmp(other.serialized_bytes())
    }
}

impl PartialOrd for Feature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cpos.as_str())?;
        f.write_str(":")?;
        if self.is_root {
            write!(f, "{ROOT_MARK}")?;
        }
        f.write_str(&self.text)
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cpos, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("feature `{s}` lacks `cpos:` prefix")))?;
        let cpos: Cpos = cpos.parse()?;
        let (text, is_root) = match rest.strip_prefix(ROOT_MARK) {
            Some(root) => (root, true),
            None => (rest, false),
        };
        if text.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "feature `{s}` has empty text"
            )));
        }
        Ok(Feature::new(cpos, text, is_root))
    }
}

/// Encodes a token as a feature. Under [`Tau::Root`] a token without a root
/// falls back to its stem, unmarked.
pub fn make_feature(token: &Token, tau: Tau) -> Feature {
    match (tau, &token.root) {
        (Tau::Root, Some(root)) => Feature::root(token.cpos, root.clone()),
        _ => Feature::stem(token.cpos, token.stem.clone()),
    }
}

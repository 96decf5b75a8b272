//! Sentence-transaction text classification over dependency-annotated corpora.
//!
//! The pipeline: [`corpus`] loads labeled, dependency-parsed documents;
//! [`featsel`] turns each sentence into an itemset (tf-idf top-N or a
//! dependency-tree strategy); [`rulemine`] mines class association rules
//! under a rule budget; [`classify`] aggregates matched rules per sentence
//! and per document, or trains a linear SVM baseline; [`eval`] runs
//! cross-validated experiments and renders result tables.

pub mod classify;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod featsel;
pub mod rulemine;
pub mod synth;

pub use error::{Error, Result};

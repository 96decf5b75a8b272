use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{Corpus, Tau, ROOT_MARK};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OverlapCell {
    pub count: usize,
    /// Most frequent root among those counted in the cell.
    pub top_root: Option<String>,
    #[serde(skip)]
    top_freq: usize,
}

impl OverlapCell {
    fn add(&mut self, root: &str, freq: usize) {
        self.count += 1;
        // Roots arrive in lexicographic order, so a strict comparison keeps
        // the smallest root on ties.
        if self.top_root.is_none() || freq > self.top_freq {
            self.top_root = Some(root.to_owned());
            self.top_freq = freq;
        }
    }
}

/// How roots spread over classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OverlapReport {
    pub classes: Vec<String>,
    /// `cells[k][k]`: roots seen only in class k. `cells[i][j]`: roots seen in
    /// exactly classes i and j, more often in i.
    pub cells: Vec<Vec<OverlapCell>>,
    /// `by_class_count[k - 1]`: roots seen in exactly k classes.
    pub by_class_count: Vec<usize>,
    pub distinct_roots: usize,
}

/// Tallies root occurrences per class over a rootified corpus.
///
/// Frequency ties between the two classes of a pair go to the
/// lexicographically smaller class. A cell's representative root is the one
/// most frequent in the row class, smallest root first on ties.
pub fn root_overlap_report(corpus: &Corpus) -> Result<OverlapReport> {
    if corpus.tau != Tau::Root {
        return Err(Error::NotRootified);
    }
    let k = corpus.classes.len();
    let mut freq: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for doc in &corpus.documents {
        let Some(ci) = corpus.class_index(&doc.label) else {
            continue;
        };
        for t in doc.sentences.iter().flat_map(|s| s.tokens.iter()) {
            if let Some(root) = t.root.as_deref() {
                freq.entry(root).or_insert_with(|| vec![0; k])[ci] += 1;
            }
        }
    }

    let mut cells = vec![vec![OverlapCell::default(); k]; k];
    let mut by_class_count = vec![0usize; k];
    for (root, counts) in &freq {
        let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
        by_class_count[present.len() - 1] += 1;
        match present[..] {
            [only] => cells[only][only].add(root, counts[only]),
            [a, b] => {
                // a < b in class order, so a wins ties.
                let (row, col) = if counts[a] >= counts[b] {
                    (a, b)
                } else {
                    (b, a)
                };
                cells[row][col].add(root, counts[row]);
            }
            _ => {}
        }
    }
    Ok(OverlapReport {
        classes: corpus.classes.clone(),
        cells,
        by_class_count,
        distinct_roots: freq.len(),
    })
}

impl fmt::Display for OverlapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            write!(f, "\t{c}")?;
        }
        writeln!(f)?;
        for (i, row) in self.cells.iter().enumerate() {
            f.write_str(&self.classes[i])?;
            for cell in row {
                match &cell.top_root {
                    Some(r) => write!(f, "\t{} {ROOT_MARK}{r}", cell.count)?,
                    None => write!(f, "\t{}", cell.count)?,
                }
            }
            writeln!(f)?;
        }
        writeln!(f, "distinct roots: {}", self.distinct_roots)?;
        for (i, n) in self.by_class_count.iter().enumerate() {
            writeln!(f, "in exactly {} classes: {n}", i + 1)?;
        }
        Ok(())
    }
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::Cpos;
use crate::error::{Error, Result};

/// Fine-to-coarse POS mapping.
///
/// Entries are exact tags, or prefixes when written with a trailing `*`.
/// Exact hits win over prefixes; among prefixes the longest wins. Tags
/// matching nothing map to [`Cpos::X`].
#[derive(Clone, Debug, Default)]
pub struct PosTable {
    exact: HashMap<String, Cpos>,
    /// Sorted by descending prefix length.
    prefixes: Vec<(String, Cpos)>,
}

impl PosTable {
    pub fn empty() -> Self {
        PosTable::default()
    }

    /// Penn-Arabic-style defaults: NN*/DTNN* to n, NNP*/DTNNP* to np, VB* to v.
    pub fn penn_arabic() -> Self {
        let mut table = PosTable::empty();
        for (pattern, cpos) in [
            ("NN*", Cpos::N),
            ("DTNN*", Cpos::N),
            ("NNP*", Cpos::Np),
            ("DTNNP*", Cpos::Np),
            ("VB*", Cpos::V),
        ] {
            table.insert(pattern, cpos);
        }
        table
    }

    pub fn insert(&mut self, pattern: &str, cpos: Cpos) {
        match pattern.strip_suffix('*') {
            Some(prefix) => {
                self.prefixes.retain(|(p, _)| p != prefix);
                self.prefixes.push((prefix.to_owned(), cpos));
                self.prefixes
                    .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
            }
            None => {
                self.exact.insert(pattern.to_owned(), cpos);
            }
        }
    }

    pub fn get(&self, fpos: &str) -> Cpos {
        if let Some(&c) = self.exact.get(fpos) {
            return c;
        }
        self.prefixes
            .iter()
            .find(|(p, _)| fpos.starts_with(p.as_str()))
            .map(|&(_, c)| c)
            .unwrap_or(Cpos::X)
    }

    /// Parses `FINE<TAB>COARSE` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut table = PosTable::empty();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(fine), Some(coarse), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse(
                    file,
                    line_no,
                    "columns",
                    "expected FINE<TAB>COARSE",
                ));
            };
            if fine.is_empty() {
                return Err(Error::parse(file, line_no, "FINE", "empty tag"));
            }
            let cpos = coarse.parse().map_err(|_| {
                Error::parse(file, line_no, "COARSE", format!("unknown cpos `{coarse}`"))
            })?;
            table.insert(fine, cpos);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        PosTable::parse(&text, &path.display().to_string())
    }
}

pub fn map_fine_pos(fpos: &str, table: &PosTable) -> Cpos {
    table.get(fpos)
}

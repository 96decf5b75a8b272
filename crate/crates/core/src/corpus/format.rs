use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{validate, Corpus, Cpos, Document, PosTable, Sentence, Tau, Token, ROOT_MARK};
use crate::error::{Error, Result};

/// On-disk corpus layouts.
///
/// `Native` is a tab-separated format:
///
/// ```text
/// #doc <id> <class>
/// INDEX  FORM  STEM  ROOT  CPOS  FPOS  HEAD  DEPREL
/// ```
///
/// with `_` for an absent root, a blank line after each sentence and a
/// second blank line (or the next `#doc`) closing the document. A `_` in
/// the CPOS column derives the tag from FPOS through the POS table.
///
/// `Conllu` reads standard 10-column CoNLL-U. `# newdoc id = ...` opens a
/// document, `# class = ...` labels it, STEM comes from LEMMA (FORM when
/// LEMMA is `_`) and ROOT from a `Root=` entry in MISC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Native,
    Conllu,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "native" => Ok(Format::Native),
            "conllu" | "conll-u" => Ok(Format::Conllu),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Native => "native",
            Format::Conllu => "conllu",
        })
    }
}

/// Reads and parses a corpus without checking tree invariants.
pub fn read_corpus(path: &Path, format: Format, tau: Tau, pos: &PosTable) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_corpus(&text, &path.display().to_string(), format, tau, pos)
}

/// Reads a corpus and rejects it unless it validates cleanly.
pub fn load_corpus(path: &Path, format: Format, tau: Tau, pos: &PosTable) -> Result<Corpus> {
    let corpus = read_corpus(path, format, tau, pos)?;
    let report = validate(&corpus);
    if report.is_clean() {
        Ok(corpus)
    } else {
        Err(Error::InvalidCorpus(report))
    }
}

pub fn parse_corpus(
    text: &str,
    file: &str,
    format: Format,
    tau: Tau,
    pos: &PosTable,
) -> Result<Corpus> {
    let docs = match format {
        Format::Native => parse_native(text, file, pos)?,
        Format::Conllu => parse_conllu(text, file, pos)?,
    };
    Ok(Corpus::new(docs, tau))
}

struct DocBuilder {
    id: String,
    label: Option<String>,
    line: usize,
    sentences: Vec<Sentence>,
}

struct Collector<'a> {
    file: &'a str,
    docs: Vec<Document>,
    ids: HashSet<String>,
    current: Option<DocBuilder>,
    tokens: Vec<Token>,
}

impl<'a> Collector<'a> {
    fn new(file: &'a str) -> Self {
        Collector {
            file,
            docs: Vec::new(),
            ids: HashSet::new(),
            current: None,
            tokens: Vec::new(),
        }
    }

    fn open(&mut self, id: String, label: Option<String>, line: usize) -> Result<()> {
        self.close()?;
        if !self.ids.insert(id.clone()) {
            return Err(Error::parse(
                self.file,
                line,
                "id",
                format!("duplicate document id `{id}`"),
            ));
        }
        self.current = Some(DocBuilder {
            id,
            label,
            line,
            sentences: Vec::new(),
        });
        Ok(())
    }

    fn end_sentence(&mut self) {
        if self.tokens.is_empty() {
            return;
        }
        let tokens = std::mem::take(&mut self.tokens);
        if let Some(doc) = self.current.as_mut() {
            doc.sentences.push(Sentence::new(tokens));
        }
    }

    fn push_token(&mut self, token: Token, line: usize) -> Result<()> {
        if self.current.is_none() {
            return Err(Error::parse(
                self.file,
                line,
                "document",
                "sentence before any document header",
            ));
        }
        let expected = self.tokens.len() + 1;
        if token.index != expected {
            return Err(Error::parse(
                self.file,
                line,
                "INDEX",
                format!("expected token index {expected}, found {}", token.index),
            ));
        }
        self.tokens.push(token);
        Ok(())
    }

    fn close(&mut self) -> Result<()> {
        self.end_sentence();
        let Some(doc) = self.current.take() else {
            return Ok(());
        };
        if doc.sentences.is_empty() {
            return Err(Error::parse(
                self.file,
                doc.line,
                "document",
                format!("document `{}` has zero sentences", doc.id),
            ));
        }
        for (i, s) in doc.sentences.iter().enumerate() {
            let n = s.tokens.len();
            if let Some(t) = s.tokens.iter().find(|t| t.head > n) {
                return Err(Error::parse(
                    self.file,
                    doc.line,
                    "HEAD",
                    format!(
                        "head out of range: document `{}` sentence {} token {} points to {} of {n}",
                        doc.id,
                        i + 1,
                        t.index,
                        t.head
                    ),
                ));
            }
        }
        let Some(label) = doc.label else {
            return Err(Error::parse(
                self.file,
                doc.line,
                "class",
                format!("document `{}` has no class", doc.id),
            ));
        };
        self.docs.push(Document {
            id: doc.id,
            label,
            sentences: doc.sentences,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<Document>> {
        self.close()?;
        Ok(self.docs)
    }
}

fn parse_index(file: &str, line: usize, field: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| {
        Error::parse(
            file,
            line,
            field,
            format!("`{value}` is not a non-negative integer"),
        )
    })
}

fn check_stem(file: &str, line: usize, stem: &str) -> Result<()> {
    if stem.is_empty() || stem == "_" {
        return Err(Error::parse(file, line, "STEM", "stem must be non-empty"));
    }
    if stem.starts_with(ROOT_MARK) {
        return Err(Error::parse(
            file,
            line,
            "STEM",
            "stem must not start with the root mark",
        ));
    }
    Ok(())
}

fn normalize_root(root: &str) -> Option<String> {
    let root = root.strip_prefix(ROOT_MARK).unwrap_or(root);
    if root.is_empty() || root == "_" {
        None
    } else {
        Some(root.to_owned())
    }
}

fn parse_native(text: &str, file: &str, pos: &PosTable) -> Result<Vec<Document>> {
    let mut c = Collector::new(file);
    let mut blank_run = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() {
            blank_run += 1;
            c.end_sentence();
            if blank_run >= 2 {
                c.close()?;
            }
            continue;
        }
        blank_run = 0;
        if let Some(rest) = l.strip_prefix("#doc") {
            let mut parts = rest.split_whitespace();
            let (Some(id), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(
                    file,
                    line,
                    "#doc",
                    "expected `#doc <id> <class>`",
                ));
            };
            c.open(id.to_owned(), Some(label.to_owned()), line)?;
            continue;
        }
        if l.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 8 {
            return Err(Error::parse(
                file,
                line,
                "columns",
                format!("expected 8 tab-separated columns, found {}", cols.len()),
            ));
        }
        let index = parse_index(file, line, "INDEX", cols[0])?;
        check_stem(file, line, cols[2])?;
        let cpos = if cols[4] == "_" {
            pos.get(cols[5])
        } else {
            Cpos::from_str(cols[4]).map_err(|_| {
                Error::parse(file, line, "CPOS", format!("unknown cpos `{}`", cols[4]))
            })?
        };
        let head = parse_index(file, line, "HEAD", cols[6])?;
        let token = Token {
            index,
            surface: cols[1].to_owned(),
            stem: cols[2].to_owned(),
            root: normalize_root(cols[3]),
            cpos,
            fpos: cols[5].to_owned(),
            head,
            deprel: cols[7].to_owned(),
        };
        c.push_token(token, line)?;
    }
    c.finish()
}

fn parse_conllu(text: &str, file: &str, pos: &PosTable) -> Result<Vec<Document>> {
    let mut c = Collector::new(file);
    let mut implicit = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() {
            c.end_sentence();
            continue;
        }
        if let Some(comment) = l.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("newdoc") {
                let id = rest
                    .trim()
                    .strip_prefix("id")
                    .and_then(|r| r.trim().strip_prefix('='))
                    .map(|r| r.trim().to_owned())
                    .filter(|r| !r.is_empty());
                implicit += 1;
                let id = id.unwrap_or_else(|| format!("doc{implicit}"));
                c.open(id, None, line)?;
            } else if let Some(rest) = comment.strip_prefix("class") {
                let Some(label) = rest.trim().strip_prefix('=').map(str::trim) else {
                    continue;
                };
                if label.is_empty() || label.contains(char::is_whitespace) {
                    return Err(Error::parse(
                        file,
                        line,
                        "class",
                        "class name must be a single non-empty word",
                    ));
                }
                // A second class comment after sentences starts a new document.
                let reopen = match c.current.as_ref() {
                    None => true,
                    Some(d) => {
                        d.label.is_some() && (!d.sentences.is_empty() || !c.tokens.is_empty())
                    }
                };
                if reopen {
                    implicit += 1;
                    c.open(format!("doc{implicit}"), None, line)?;
                }
                if let Some(d) = c.current.as_mut() {
                    d.label = Some(label.to_owned());
                }
            }
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                file,
                line,
                "columns",
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        // Multiword ranges and empty nodes are not tree tokens.
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index = parse_index(file, line, "ID", cols[0])?;
        let stem = if cols[2] == "_" { cols[1] } else { cols[2] };
        check_stem(file, line, stem)?;
        let fpos = if cols[4] == "_" { cols[3] } else { cols[4] };
        let head = parse_index(file, line, "HEAD", cols[6])?;
        let root = cols[9]
            .split('|')
            .find_map(|kv| kv.strip_prefix("Root="))
            .and_then(normalize_root);
        let token = Token {
            index,
            surface: cols[1].to_owned(),
            stem: stem.to_owned(),
            root,
            cpos: pos.get(fpos),
            fpos: fpos.to_owned(),
            head,
            deprel: cols[7].to_owned(),
        };
        c.push_token(token, line)?;
    }
    c.finish()
}

/// Serializes a corpus in the native layout.
pub fn write_native(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        let _ = writeln!(out, "#doc {} {}", doc.id, doc.label);
        for s in &doc.sentences {
            for t in &s.tokens {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    t.index,
                    t.surface,
                    t.stem,
                    t.root.as_deref().unwrap_or("_"),
                    t.cpos,
                    t.fpos,
                    t.head,
                    t.deprel
                );
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CLASS: &str = "\
#doc d1 sports
1\tلعب\tلعب\tلعب\tv\tVBD\t0\troot
2\tالفريق\tفريق\t√فرق\tn\tDTNN\t1\tnsubj
3\tالكرة\tكرة\t_\t_\tDTNN\t1\tdobj

#doc d2 economy
1\tارتفع\tرفع\tرفع\tv\tVBD\t0\troot
2\tالسهم\tسهم\tسهم\tn\tDTNN\t1\tnsubj


#doc d3 economy
1\tريال\tريال\t_\tn\tNN\t0\troot

#doc d4 sports
1\tفاز\tفوز\tفوز\tv\tVBD\t0\troot
2\tمدريد\tمدريد\t_\tnp\tNNP\t1\tnsubj

";

    fn parse(text: &str) -> Result<Corpus> {
        parse_corpus(
            text,
            "t.txt",
            Format::Native,
            Tau::Stem,
            &PosTable::penn_arabic(),
        )
    }

    #[test]
    fn minimal_document() {
        let c = parse("#doc a c1\n1\tx\tx\t_\tv\tVB\t0\troot\n2\ty\ty\t_\tn\tNN\t1\tdep\n3\tz\tz\t_\tn\tNN\t1\tdep\n")
            .unwrap();
        assert_eq!(c.documents.len(), 1);
        assert_eq!(c.num_sentences(), 1);
        assert_eq!(c.documents[0].sentences[0].len(), 3);
    }

    #[test]
    fn two_class_fixture() {
        let c = parse(TWO_CLASS).unwrap();
        assert_eq!(c.classes, vec!["economy", "sports"]);
        assert_eq!(c.documents.len(), 4);
        let d1 = &c.documents[0].sentences[0];
        assert_eq!(d1.tokens[1].root.as_deref(), Some("فرق"));
        assert_eq!(d1.tokens[2].root, None);
        assert_eq!(d1.tokens[2].cpos, Cpos::N, "`_` cpos maps from DTNN");
        assert!(validate(&c).is_clean());
    }

    #[test]
    fn head_out_of_range() {
        let err = parse("#doc a c1\n1\tx\tx\t_\tv\tVB\t0\troot\n2\ty\ty\t_\tn\tNN\t99\tdep\n3\tz\tz\t_\tn\tNN\t1\tdep\n")
            .unwrap_err();
        assert!(err.to_string().contains("head out of range"), "{err}");
    }

    #[test]
    fn malformed_lines_name_file_line_field() {
        let err = parse("#doc a c1\n1\tx\tx\t_\tv\tVB\tzero\troot\n").unwrap_err();
        assert_eq!(
            err.to_string(),
            "t.txt:2: HEAD: `zero` is not a non-negative integer"
        );

        let err = parse("#doc a c1\n1\tx\tx\t_\tadj\tJJ\t0\troot\n").unwrap_err();
        assert!(
            err.to_string().starts_with("t.txt:2: CPOS: unknown cpos"),
            "{err}"
        );

        let err = parse("#doc a c1\n1\tx\tx\n").unwrap_err();
        assert!(err.to_string().starts_with("t.txt:2: columns"), "{err}");

        let err = parse("1\tx\tx\t_\tv\tVB\t0\troot\n").unwrap_err();
        assert!(err.to_string().contains("before any document"), "{err}");
    }

    #[test]
    fn empty_document_is_error() {
        let err = parse("#doc a c1\n#doc b c2\n1\tx\tx\t_\tv\tVB\t0\troot\n").unwrap_err();
        assert!(err.to_string().contains("zero sentences"), "{err}");
    }

    #[test]
    fn duplicate_id_is_error() {
        let err = parse(
            "#doc a c1\n1\tx\tx\t_\tv\tVB\t0\troot\n\n#doc a c2\n1\tx\tx\t_\tv\tVB\t0\troot\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn cycles_parse_but_fail_load() {
        let text = "#doc a c1\n1\tx\tx\t_\tv\tVB\t0\troot\n2\ty\ty\t_\tn\tNN\t3\tdep\n3\tz\tz\t_\tn\tNN\t2\tdep\n";
        let c = parse(text).unwrap();
        assert!(validate(&c).to_string().contains("cycle"));
    }

    #[test]
    fn native_round_trip() {
        let c = parse(TWO_CLASS).unwrap();
        let again = parse(&write_native(&c)).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn conllu_reader() {
        let text = "\
# newdoc id = n1
# class = sports
# sent_id = 1
1\tلعب\tلعب\tVERB\tVBD\t_\t0\troot\t_\tRoot=لعب
2-3\tبالكرة\t_\t_\t_\t_\t_\t_\t_\t_
2\tب\tب\tADP\tIN\t_\t3\tcase\t_\t_
3\tالكرة\tكرة\tNOUN\tDTNN\t_\t1\tobl\t_\t_

# class = economy
1\tريال\t_\tNOUN\tNN\t_\t0\troot\t_\tRoot=√ريل|SpaceAfter=No

";
        let c = parse_corpus(
            text,
            "t.conllu",
            Format::Conllu,
            Tau::Root,
            &PosTable::penn_arabic(),
        )
        .unwrap();
        assert_eq!(c.documents.len(), 2);
        assert_eq!(c.documents[0].id, "n1");
        assert_eq!(c.documents[1].id, "doc2");
        assert_eq!(c.classes, vec!["economy", "sports"]);
        let s = &c.documents[0].sentences[0];
        assert_eq!(s.len(), 3);
        assert_eq!(s.tokens[0].cpos, Cpos::V);
        assert_eq!(s.tokens[1].cpos, Cpos::X);
        assert_eq!(s.tokens[2].cpos, Cpos::N);
        assert_eq!(s.tokens[0].root.as_deref(), Some("لعب"));
        let t = &c.documents[1].sentences[0].tokens[0];
        assert_eq!(t.stem, "ريال");
        assert_eq!(t.root.as_deref(), Some("ريل"));
    }

    #[test]
    fn conllu_missing_class() {
        let text = "# newdoc id = n1\n1\tx\tx\tNOUN\tNN\t_\t0\troot\t_\t_\n\n";
        let err = parse_corpus(
            text,
            "t.conllu",
            Format::Conllu,
            Tau::Stem,
            &PosTable::penn_arabic(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("t.conllu:1: class"), "{err}");
    }
}

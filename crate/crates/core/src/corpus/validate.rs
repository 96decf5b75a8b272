use std::fmt;

use super::{Corpus, Sentence};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NoRoot,
    MultipleRoots(Vec<usize>),
    /// Tokens (1-based) that lie on a head cycle.
    Cycle(Vec<usize>),
    SelfHead(usize),
    HeadOutOfRange {
        token: usize,
        head: usize,
    },
    IndexOutOfSequence {
        position: usize,
        index: usize,
    },
    EmptySentence,
    EmptyDocument,
    UnknownLabel(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub document: String,
    /// 1-based sentence number within the document.
    pub sentence: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "document {}", self.document)?;
        if let Some(s) = self.sentence {
            write!(f, ", sentence {s}")?;
        }
        f.write_str(": ")?;
        match &self.kind {
            ViolationKind::NoRoot => f.write_str("no root (no token has head 0)"),
            ViolationKind::MultipleRoots(ts) => write!(f, "multiple roots at tokens {}", join(ts)),
            ViolationKind::Cycle(ts) => write!(f, "cycle through tokens {}", join(ts)),
            ViolationKind::SelfHead(t) => write!(f, "token {t} is its own head"),
            ViolationKind::HeadOutOfRange { token, head } => {
                write!(f, "head out of range: token {token} points to {head}")
            }
            ViolationKind::IndexOutOfSequence { position, index } => {
                write!(f, "token at position {position} has index {index}")
            }
            ViolationKind::EmptySentence => f.write_str("empty sentence"),
            ViolationKind::EmptyDocument => f.write_str("document has no sentences"),
            ViolationKind::UnknownLabel(l) => write!(f, "label `{l}` is not a corpus class"),
        }
    }
}

fn join(ts: &[usize]) -> String {
    ts.iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate(corpus: &Corpus) -> ValidationReport {
    let mut violations = Vec::new();
    for doc in &corpus.documents {
        if corpus.class_index(&doc.label).is_none() {
            violations.push(Violation {
                document: doc.id.clone(),
                sentence: None,
                kind: ViolationKind::UnknownLabel(doc.label.clone()),
            });
        }
        if doc.sentences.is_empty() {
            violations.push(Violation {
                document: doc.id.clone(),
                sentence: None,
                kind: ViolationKind::EmptyDocument,
            });
        }
        for (i, sentence) in doc.sentences.iter().enumerate() {
            for kind in sentence_violations(sentence) {
                violations.push(Violation {
                    document: doc.id.clone(),
                    sentence: Some(i + 1),
                    kind,
                });
            }
        }
    }
    ValidationReport { violations }
}

pub(crate) fn sentence_violations(sentence: &Sentence) -> Vec<ViolationKind> {
    let n = sentence.tokens.len();
    if n == 0 {
        return vec![ViolationKind::EmptySentence];
    }
    let mut out = Vec::new();
    let mut structural = false;
    for (pos, t) in sentence.tokens.iter().enumerate() {
        if t.index != pos + 1 {
            out.push(ViolationKind::IndexOutOfSequence {
                position: pos + 1,
                index: t.index,
            });
            structural = true;
        }
        if t.head > n {
            out.push(ViolationKind::HeadOutOfRange {
                token: pos + 1,
                head: t.head,
            });
            structural = true;
        } else if t.head == pos + 1 {
            out.push(ViolationKind::SelfHead(pos + 1));
            structural = true;
        }
    }
    let roots: Vec<usize> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.head == 0)
        .map(|(i, _)| i + 1)
        .collect();
    match roots.len() {
        0 => out.push(ViolationKind::NoRoot),
        1 => {}
        _ => out.push(ViolationKind::MultipleRoots(roots)),
    }
    if structural {
        return out;
    }

    // Walk parent pointers with three-color marking; every back edge closes
    // one cycle.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnPath,
        Done,
    }
    let mut mark = vec![Mark::Fresh; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            match mark[cur] {
                Mark::Done => break,
                Mark::OnPath => {
                    let from = path.iter().position(|&p| p == cur).unwrap_or(0);
                    let mut cycle: Vec<usize> = path[from..].iter().map(|&p| p + 1).collect();
                    cycle.sort_unstable();
                    out.push(ViolationKind::Cycle(cycle));
                    break;
                }
                Mark::Fresh => {
                    mark[cur] = Mark::OnPath;
                    path.push(cur);
                    let head = sentence.tokens[cur].head;
                    if head == 0 {
                        break;
                    }
                    cur = head - 1;
                }
            }
        }
        for p in path {
            mark[p] = Mark::Done;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::tok;
    use super::super::{Cpos, Document, Tau};
    use super::*;

    fn corpus_of(tokens: Vec<crate::corpus::Token>) -> Corpus {
        Corpus::new(
            vec![Document {
                id: "d1".into(),
                label: "A".into(),
                sentences: vec![Sentence::new(tokens)],
            }],
            Tau::Stem,
        )
    }

    #[test]
    fn well_formed_is_clean() {
        let c = corpus_of(vec![
            tok(1, "h", Cpos::V, 0),
            tok(2, "a", Cpos::N, 1),
            tok(3, "b", Cpos::N, 2),
        ]);
        assert!(validate(&c).is_clean());
    }

    #[test]
    fn two_cycle_is_reported() {
        let c = corpus_of(vec![
            tok(1, "h", Cpos::V, 0),
            tok(2, "a", Cpos::N, 3),
            tok(3, "b", Cpos::N, 2),
        ]);
        let report = validate(&c);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::Cycle(vec![2, 3]));
        assert!(report.to_string().contains("cycle"));
    }

    #[test]
    fn multiple_roots() {
        let c = corpus_of(vec![tok(1, "h", Cpos::V, 0), tok(2, "a", Cpos::N, 0)]);
        let report = validate(&c);
        assert!(report.to_string().contains("multiple roots"), "{report}");
    }

    #[test]
    fn no_root_when_everything_cycles() {
        let c = corpus_of(vec![tok(1, "h", Cpos::V, 2), tok(2, "a", Cpos::N, 1)]);
        let kinds: Vec<_> = validate(&c)
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(kinds.contains(&ViolationKind::NoRoot));
        assert!(kinds.contains(&ViolationKind::Cycle(vec![1, 2])));
    }

    #[test]
    fn out_of_range_and_self_head() {
        let c = corpus_of(vec![
            tok(1, "h", Cpos::V, 0),
            tok(2, "a", Cpos::N, 99),
            tok(3, "b", Cpos::N, 3),
        ]);
        let s = validate(&c).to_string();
        assert!(s.contains("head out of range"), "{s}");
        assert!(s.contains("own head"), "{s}");
    }

    #[test]
    fn unknown_label() {
        let mut c = corpus_of(vec![tok(1, "h", Cpos::V, 0)]);
        c.classes = vec!["B".into()];
        let report = validate(&c);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::UnknownLabel("A".into())
        );
    }
}

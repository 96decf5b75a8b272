//! Synthetic corpora with known structure, for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Cpos, Document, Sentence, Tau, Token};

/// Parameters of a corpus where every sentence carries one noun marker
/// exclusive to its document's class.
#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub classes: Vec<String>,
    pub docs_per_class: usize,
    pub sentences_per_doc: usize,
    pub markers_per_class: usize,
    /// Markers hang at depth 1 or 2, alternating by sentence.
    pub max_marker_depth: usize,
    /// Size of the shared noun vocabulary.
    pub noise_nouns: usize,
    pub noise_per_sentence: usize,
    pub verbs: usize,
    pub seed: u64,
    pub tau: Tau,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            classes: ["CUL", "LOC", "INT", "SPO", "REL", "ECO"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            docs_per_class: 100,
            sentences_per_doc: 3,
            markers_per_class: 3,
            max_marker_depth: 2,
            noise_nouns: 24,
            noise_per_sentence: 3,
            verbs: 12,
            seed: 1,
            tau: Tau::Stem,
        }
    }
}

impl PlantedSpec {
    pub fn marker(&self, class: usize, j: usize) -> String {
        format!("{}-mark{j}", self.classes[class].to_lowercase())
    }
}

struct SentenceBuilder {
    tokens: Vec<Token>,
}

impl SentenceBuilder {
    fn add(&mut self, stem: &str, cpos: Cpos, head: usize, deprel: &str) -> usize {
        let index = self.tokens.len() + 1;
        let fpos = match cpos {
            Cpos::N => "NN",
            Cpos::Np => "NNP",
            Cpos::V => "VBD",
            Cpos::X => "IN",
        };
        self.tokens.push(Token {
            index,
            surface: stem.to_owned(),
            stem: stem.to_owned(),
            root: Some(format!("r{stem}")),
            cpos,
            fpos: fpos.to_owned(),
            head,
            deprel: deprel.to_owned(),
        });
        index
    }
}

/// Builds the planted corpus. Marker `j` of a class is used by sentence
/// number `d * sentences_per_doc + s` of that class when the number is
/// congruent to `j`, so marker frequencies are balanced exactly.
pub fn planted_corpus(spec: &PlantedSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::new();
    for d in 0..spec.docs_per_class {
        for (c, class) in spec.classes.iter().enumerate() {
            let mut sentences = Vec::with_capacity(spec.sentences_per_doc);
            for s in 0..spec.sentences_per_doc {
                let serial = d * spec.sentences_per_doc + s;
                let marker = spec.marker(c, serial % spec.markers_per_class);
                let depth = 1 + serial % spec.max_marker_depth.max(1);
                let mut b = SentenceBuilder { tokens: Vec::new() };
                let verb = format!("verb{}", rng.gen_range(0..spec.verbs));
                let head = b.add(&verb, Cpos::V, 0, "root");
                let mut attach = head;
                for _ in 1..depth {
                    attach = b.add("fi", Cpos::X, attach, "prep");
                }
                b.add(&marker, Cpos::N, attach, "pobj");
                let mut nouns: Vec<usize> = (0..spec.noise_nouns).collect();
                nouns.shuffle(&mut rng);
                for &noun in nouns.iter().take(spec.noise_per_sentence) {
                    let parent = rng.gen_range(1..=b.tokens.len());
                    b.add(&format!("noun{noun}"), Cpos::N, parent, "dep");
                }
                sentences.push(Sentence::new(b.tokens));
            }
            documents.push(Document {
                id: format!("{}-{d:03}", class.to_lowercase()),
                label: class.clone(),
                sentences,
            });
        }
    }
    Corpus::new(documents, spec.tau)
}

/// The same corpus with document labels randomly permuted.
pub fn shuffle_labels(corpus: &Corpus, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<String> = corpus.documents.iter().map(|d| d.label.clone()).collect();
    labels.shuffle(&mut rng);
    let documents = corpus
        .documents
        .iter()
        .zip(labels)
        .map(|(d, label)| Document { label, ..d.clone() })
        .collect();
    Corpus::new(documents, corpus.tau)
}

/// A random dependency tree of `n` tokens over a small vocabulary, with
/// mixed POS tags. Parents always precede children, so it is a valid tree.
pub fn random_sentence<R: Rng>(rng: &mut R, n: usize) -> Sentence {
    const TAGS: [Cpos; 4] = [Cpos::N, Cpos::Np, Cpos::V, Cpos::X];
    let mut b = SentenceBuilder { tokens: Vec::new() };
    for i in 0..n.max(1) {
        let cpos = TAGS[rng.gen_range(0..TAGS.len())];
        let word = format!("w{}", rng.gen_range(0..12));
        let head = if i == 0 { 0 } else { rng.gen_range(1..=i) };
        b.add(&word, cpos, head, "dep");
    }
    // Relabel so the head is not always token 1.
    let perm = {
        let mut p: Vec<usize> = (0..b.tokens.len()).collect();
        p.shuffle(rng);
        p
    };
    let mut tokens: Vec<Token> = vec![b.tokens[0].clone(); b.tokens.len()];
    for (old, t) in b.tokens.iter().enumerate() {
        let mut t = t.clone();
        t.index = perm[old] + 1;
        t.head = if t.head == 0 { 0 } else { perm[t.head - 1] + 1 };
        tokens[perm[old]] = t;
    }
    Sentence::new(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate;

    #[test]
    fn planted_is_valid_and_sized() {
        let spec = PlantedSpec {
            docs_per_class: 5,
            ..PlantedSpec::default()
        };
        let c = planted_corpus(&spec);
        assert_eq!(c.documents.len(), 30);
        assert_eq!(c.classes.len(), 6);
        assert!(validate(&c).is_clean());
        let depths: Vec<usize> = c
            .sentences()
            .map(|s| {
                let pos = s
                    .tokens
                    .iter()
                    .position(|t| t.stem.contains("-mark"))
                    .unwrap();
                s.depths()[pos].unwrap()
            })
            .collect();
        assert!(depths.iter().all(|&d| d == 1 || d == 2));
        assert!(depths.contains(&2));
    }

    #[test]
    fn random_sentences_are_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..25 {
            let s = random_sentence(&mut rng, n);
            let c = Corpus::new(
                vec![Document {
                    id: "d".into(),
                    label: "A".into(),
                    sentences: vec![s],
                }],
                Tau::Stem,
            );
            assert!(validate(&c).is_clean());
        }
    }
}

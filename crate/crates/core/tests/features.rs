//! Feature-selection strategies on random trees and on a transliterated
//! news sentence.

use std::collections::BTreeSet;

use depcar_core::corpus::{make_feature, Corpus, Cpos, Document, Sentence, Tau, Token};
use depcar_core::featsel::{
    corpus_to_transactions, depth_from_head, extract_strategy, select_tfidf_top_n, tfidf, ItemSet,
    StrategySpec,
};
use depcar_core::synth::random_sentence;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_doc(sentences: Vec<Sentence>) -> Corpus {
    Corpus::new(
        vec![Document {
            id: "d".into(),
            label: "A".into(),
            sentences,
        }],
        Tau::Stem,
    )
}

fn random_corpus(seed: u64, sentences: usize, max_len: usize) -> Corpus {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..sentences)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            random_sentence(&mut rng, n)
        })
        .collect();
    one_doc(s)
}

/// Depths by breadth-first search from the head.
fn bfs_depths(s: &Sentence) -> Vec<usize> {
    let mut depth = vec![usize::MAX; s.len()];
    let head = s.tokens.iter().position(|t| t.head == 0).unwrap();
    depth[head] = 0;
    let mut frontier = vec![head];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for p in frontier {
            for (i, t) in s.tokens.iter().enumerate() {
                if t.head == p + 1 {
                    depth[i] = depth[p] + 1;
                    next.push(i);
                }
            }
        }
        frontier = next;
    }
    depth
}

/// Strategy output computed from scratch with BFS depths.
fn oracle(s: &Sentence, spec: StrategySpec) -> ItemSet {
    let depth = bfs_depths(s);
    let head = s.tokens.iter().position(|t| t.head == 0).unwrap();
    let head_cpos = s.tokens[head].cpos;
    let head_item = matches!(head_cpos, Cpos::N | Cpos::Np | Cpos::V);
    let nominal = |t: &Token| matches!(t.cpos, Cpos::N | Cpos::Np);
    let mut out = BTreeSet::new();
    for (i, t) in s.tokens.iter().enumerate() {
        let keep = match spec {
            StrategySpec::HeadOnly => i == head && head_item,
            StrategySpec::NounsDist1 => depth[i] == 1 && nominal(t),
            StrategySpec::HeadPlusNouns(d) => {
                (i == head && head_item) || (depth[i] >= 1 && depth[i] <= d && nominal(t))
            }
            StrategySpec::HeadAllNouns => (i == head && head_item) || (i != head && nominal(t)),
            StrategySpec::HeadAllNounsVerbs => {
                (i == head && head_item) || (i != head && (nominal(t) || t.cpos == Cpos::V))
            }
            StrategySpec::TfidfTopN(_) => unreachable!(),
        };
        if keep {
            out.insert(make_feature(t, Tau::Stem));
        }
    }
    out
}

const CHAIN: [StrategySpec; 6] = [
    StrategySpec::NounsDist1,
    StrategySpec::HeadPlusNouns(1),
    StrategySpec::HeadPlusNouns(2),
    StrategySpec::HeadPlusNouns(3),
    StrategySpec::HeadAllNouns,
    StrategySpec::HeadAllNounsVerbs,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strategies_match_oracle_and_nest(seed in any::<u64>(), n in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sentence(&mut rng, n);
        let c = one_doc(vec![s.clone()]);
        let sets: Vec<ItemSet> = CHAIN.iter().map(|&spec| extract_strategy(&s, spec, &c, Tau::Stem)).collect();
        for (spec, got) in CHAIN.iter().zip(&sets) {
            prop_assert_eq!(got, &oracle(&s, *spec));
        }
        for w in sets.windows(2) {
            prop_assert!(w[0].is_subset(&w[1]));
        }
        let head = extract_strategy(&s, StrategySpec::HeadOnly, &c, Tau::Stem);
        prop_assert_eq!(&head, &oracle(&s, StrategySpec::HeadOnly));
        if !head.is_empty() {
            prop_assert!(head.is_subset(&sets[1]));
        }
        for d in 1..6 {
            let a = extract_strategy(&s, StrategySpec::HeadPlusNouns(d), &c, Tau::Stem);
            let b = extract_strategy(&s, StrategySpec::HeadPlusNouns(d + 1), &c, Tau::Stem);
            prop_assert!(a.is_subset(&b));
            prop_assert!(b.is_subset(&sets[4]));
        }
    }

    #[test]
    fn depth_recurrence(seed in any::<u64>(), n in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_sentence(&mut rng, n);
        let bfs = bfs_depths(&s);
        for (i, t) in s.tokens.iter().enumerate() {
            let d = depth_from_head(&s, i).unwrap();
            prop_assert_eq!(d, bfs[i]);
            if t.head == 0 {
                prop_assert_eq!(d, 0);
            } else {
                prop_assert_eq!(d, depth_from_head(&s, t.head - 1).unwrap() + 1);
            }
        }
    }

    #[test]
    fn tfidf_zero_iff_everywhere_and_top_n_nests(seed in any::<u64>()) {
        let c = random_corpus(seed, 6, 8);
        for s in c.sentences() {
            for t in &s.tokens {
                let f = make_feature(t, Tau::Stem);
                let everywhere = c.sentences().all(|o| o.tokens.iter().any(|u| make_feature(u, Tau::Stem) == f));
                let v = tfidf(t, s, &c, Tau::Stem);
                prop_assert!(v >= 0.0);
                prop_assert_eq!(v == 0.0, everywhere);
            }
            let distinct: BTreeSet<_> = s.tokens.iter().map(|t| make_feature(t, Tau::Stem)).collect();
            for n in 1..=distinct.len() + 1 {
                let a = select_tfidf_top_n(s, &c, n, Tau::Stem);
                let b = select_tfidf_top_n(s, &c, n + 1, Tau::Stem);
                prop_assert_eq!(a.len(), n.min(distinct.len()));
                prop_assert!(a.is_subset(&b));
            }
        }
    }
}

#[test]
fn average_size_monotone_along_chain() {
    for seed in 0..100 {
        let c = random_corpus(seed, 10, 20);
        // Measured over sentences every strategy keeps.
        let kept: Vec<Sentence> = c
            .sentences()
            .filter(|s| !extract_strategy(s, StrategySpec::NounsDist1, &c, Tau::Stem).is_empty())
            .cloned()
            .collect();
        if kept.is_empty() {
            continue;
        }
        let fixed = one_doc(kept);
        let sizes: Vec<f64> = CHAIN
            .iter()
            .map(|&spec| {
                corpus_to_transactions(&fixed, spec, Tau::Stem)
                    .unwrap()
                    .avg_transaction_size
            })
            .collect();
        for w in sizes.windows(2) {
            assert!(w[0] <= w[1], "seed {seed}: {sizes:?}");
        }
    }
}

#[test]
fn head_only_averages_one() {
    let c = random_corpus(5, 40, 12);
    let t = corpus_to_transactions(&c, StrategySpec::HeadOnly, Tau::Stem).unwrap();
    assert_eq!(t.avg_transaction_size, 1.0);
}

fn tok(index: usize, stem: &str, cpos: Cpos, head: usize) -> Token {
    Token {
        index,
        surface: stem.into(),
        stem: stem.into(),
        root: None,
        cpos,
        fpos: "_".into(),
        head,
        deprel: "dep".into(),
    }
}

/// The Patriot-battery sentence: a verb head, three nouns at distance 1,
/// deeper nouns along the object and the locative chains.
fn news_sentence() -> Sentence {
    Sentence::new(vec![
        tok(1, "nasabat", Cpos::V, 0),
        tok(2, "al-yunan", Cpos::Np, 1),
        tok(3, "sitt", Cpos::N, 1),
        tok(4, "batariyat", Cpos::N, 3),
        tok(5, "sawarikh", Cpos::N, 4),
        tok(6, "patriot", Cpos::Np, 5),
        tok(7, "didd", Cpos::X, 5),
        tok(8, "jawiyya", Cpos::X, 7),
        tok(9, "al-qurb", Cpos::N, 1),
        tok(10, "min", Cpos::X, 9),
        tok(11, "al-olympiyya", Cpos::X, 10),
        tok(12, "tatoi", Cpos::Np, 11),
        tok(13, "al-asima", Cpos::N, 12),
        tok(14, "qabla", Cpos::X, 1),
        tok(15, "aghustus", Cpos::N, 14),
        tok(16, "tiraz", Cpos::N, 6),
    ])
}

fn texts(items: &ItemSet) -> BTreeSet<&str> {
    items.iter().map(|f| f.text.as_str()).collect()
}

#[test]
fn news_sentence_strategies() {
    let s = news_sentence();
    let c = one_doc(vec![s.clone()]);
    let get = |spec| extract_strategy(&s, spec, &c, Tau::Stem);
    let set = |xs: &[&'static str]| xs.iter().copied().collect::<BTreeSet<&str>>();

    assert_eq!(texts(&get(StrategySpec::HeadOnly)), set(&["nasabat"]));
    assert_eq!(
        texts(&get(StrategySpec::NounsDist1)),
        set(&["al-yunan", "sitt", "al-qurb"])
    );
    assert_eq!(
        texts(&get(StrategySpec::HeadPlusNouns(1))),
        set(&["nasabat", "al-yunan", "sitt", "al-qurb"])
    );
    assert_eq!(
        texts(&get(StrategySpec::HeadPlusNouns(2))),
        set(&[
            "nasabat",
            "al-yunan",
            "sitt",
            "al-qurb",
            "batariyat",
            "aghustus"
        ])
    );
    assert_eq!(
        texts(&get(StrategySpec::HeadPlusNouns(3))),
        set(&[
            "nasabat",
            "al-yunan",
            "sitt",
            "al-qurb",
            "batariyat",
            "aghustus",
            "sawarikh"
        ])
    );
    let all = set(&[
        "nasabat",
        "al-yunan",
        "sitt",
        "al-qurb",
        "batariyat",
        "aghustus",
        "sawarikh",
        "patriot",
        "tatoi",
        "al-asima",
        "tiraz",
    ]);
    assert_eq!(texts(&get(StrategySpec::HeadAllNouns)), all);
    assert_eq!(texts(&get(StrategySpec::HeadAllNounsVerbs)), all);
}

#[test]
fn small_tree_by_hand() {
    // v0 <- n1 <- n3 ; v0 <- p2 <- n4
    let s = Sentence::new(vec![
        tok(1, "v0", Cpos::V, 0),
        tok(2, "n1", Cpos::N, 1),
        tok(3, "p2", Cpos::X, 1),
        tok(4, "n3", Cpos::N, 2),
        tok(5, "n4", Cpos::N, 3),
    ]);
    let c = one_doc(vec![s.clone()]);
    let get = |spec| {
        texts(&extract_strategy(&s, spec, &c, Tau::Stem))
            .into_iter()
            .map(str::to_owned)
            .collect::<Vec<_>>()
    };
    assert_eq!(get(StrategySpec::HeadOnly), ["v0"]);
    assert_eq!(get(StrategySpec::NounsDist1), ["n1"]);
    assert_eq!(get(StrategySpec::HeadPlusNouns(1)), ["n1", "v0"]);
    assert_eq!(
        get(StrategySpec::HeadPlusNouns(2)),
        ["n1", "n3", "n4", "v0"]
    );
}

#[test]
fn function_word_head_without_nouns_is_empty() {
    let s = Sentence::new(vec![tok(1, "wa", Cpos::X, 0), tok(2, "qala", Cpos::V, 1)]);
    let c = one_doc(vec![s.clone()]);
    assert!(extract_strategy(&s, StrategySpec::HeadOnly, &c, Tau::Stem).is_empty());
    assert!(extract_strategy(&s, StrategySpec::HeadAllNouns, &c, Tau::Stem).is_empty());
}

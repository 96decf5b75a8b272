use depcar_core::classify::{predict_linear, train_linear, LinearModel, RuleClassifier, SvmParams};
use depcar_core::corpus::{Cpos, Feature};
use depcar_core::featsel::{ItemSet, Transaction};
use depcar_core::rulemine::{generate_cars, MineConfig, Rule};
use proptest::prelude::*;

const CLASSES: [&str; 3] = ["A", "B", "C"];

fn item(i: u8) -> Feature {
    Feature::stem(Cpos::N, format!("w{i}"))
}

fn itemset(ids: &[u8]) -> ItemSet {
    ids.iter().map(|&i| item(i)).collect()
}

fn transactions(raw: &[(Vec<u8>, usize)]) -> Vec<Transaction> {
    raw.iter()
        .map(|(ids, c)| Transaction::new(ids.iter().map(|&i| item(i)), CLASSES[*c]))
        .collect()
}

fn raw_data() -> impl Strategy<Value = Vec<(Vec<u8>, usize)>> {
    prop::collection::vec((prop::collection::vec(0u8..8, 1..5), 0usize..3), 4..30)
}

fn mined(t: &[Transaction]) -> Vec<Rule> {
    generate_cars(t, &MineConfig::new(0.05, 0.3)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn argmax_survives_rescaling(raw in raw_data(), probe in prop::collection::vec(0u8..8, 0..5), k in -3i32..=3) {
        let t = transactions(&raw);
        let rules = mined(&t);
        let factor = 2f64.powi(k);
        let scaled: Vec<Rule> = rules.iter().cloned().map(|mut r| { r.confidence *= factor; r }).collect();
        let a = RuleClassifier::new(rules, &CLASSES, "A").unwrap();
        let b = RuleClassifier::new(scaled, &CLASSES, "A").unwrap();
        let x = itemset(&probe);
        let (pa, pb) = (a.classify_sentence(&x), b.classify_sentence(&x));
        prop_assert_eq!(&pa.class, &pb.class);
        prop_assert_eq!(pa.abstained, pb.abstained);
        for (sa, sb) in pa.scores.iter().zip(&pb.scores) {
            prop_assert!((sa * factor - sb).abs() <= 1e-12 * sb.abs().max(1.0));
        }
    }

    #[test]
    fn unmatched_rule_changes_nothing(raw in raw_data(), probes in prop::collection::vec(prop::collection::vec(0u8..8, 0..5), 1..10)) {
        let t = transactions(&raw);
        let rules = mined(&t);
        let mut extended = rules.clone();
        extended.push(Rule { items: vec![item(200)], class: "C".into(), support: 1.0, confidence: 1.0 });
        let a = RuleClassifier::new(rules, &CLASSES, "B").unwrap();
        let b = RuleClassifier::new(extended, &CLASSES, "B").unwrap();
        for p in &probes {
            prop_assert_eq!(a.classify_sentence(&itemset(p)), b.classify_sentence(&itemset(p)));
        }
    }

    #[test]
    fn single_sentence_document(raw in raw_data(), probe in prop::collection::vec(0u8..8, 0..5)) {
        let t = transactions(&raw);
        let rc = RuleClassifier::new(mined(&t), &CLASSES, "C").unwrap();
        let x = itemset(&probe);
        prop_assert_eq!(rc.classify_document([&x]), rc.classify_sentence(&x));
    }

    #[test]
    fn linear_prediction_ignores_vocabulary_order(raw in raw_data(), probe in prop::collection::vec(0u8..8, 0..5), rot in 1usize..8) {
        let t = transactions(&raw);
        let params = SvmParams { epochs: 3, ..SvmParams::default() };
        let Ok(m) = train_linear(&t, &CLASSES, &params) else { return Ok(()); };
        let n = m.vocabulary.len();
        let perm: Vec<usize> = (0..n).map(|j| (j + rot) % n.max(1)).collect();
        let vocabulary = perm.iter().map(|&j| m.vocabulary[j].clone()).collect();
        let weights = m.weights.iter().map(|w| perm.iter().map(|&j| w[j]).collect()).collect();
        let p = LinearModel::from_parts(vocabulary, m.classes.clone(), weights, m.biases.clone(), m.params.clone()).unwrap();
        let x = itemset(&probe);
        let (ca, ma) = predict_linear(&x, &m);
        let (cb, mb) = predict_linear(&x, &p);
        prop_assert_eq!(ca, cb);
        for (a, b) in ma.iter().zip(&mb) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

//! Frequent itemsets and class association rules.
//!
//! Mining interns features into dense ids (id order equals feature order),
//! enumerates frequent itemsets depth-first over tid-lists, and keeps the
//! class distribution of every frequent itemset. A [`RulePool`] mined once
//! at the smallest support of a grid can then answer any `(σ, κ, N_R)`
//! query by filtering, which is what [`tune`] and [`rule_count_curve`] do.
//!
//! Thresholds are inclusive: an itemset is frequent when its support is at
//! least σ, and a rule is kept when its confidence is at least κ.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Feature;
use crate::error::{Error, Result};
use crate::featsel::{ItemSet, Transaction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MineConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub rule_budget: usize,
    /// `None` means unbounded.
    pub max_itemset_size: Option<usize>,
}

impl MineConfig {
    pub fn new(min_support: f64, min_confidence: f64) -> Self {
        MineConfig {
            min_support,
            min_confidence,
            rule_budget: DEFAULT_RULE_BUDGET,
            max_itemset_size: None,
        }
    }

    fn check(&self) -> Result<()> {
        check_support(self.min_support)?;
        check_confidence(self.min_confidence)?;
        if self.rule_budget == 0 {
            return Err(Error::InvalidArgument(
                "rule budget must be positive".into(),
            ));
        }
        check_max_size(self.max_itemset_size)
    }
}

pub const DEFAULT_RULE_BUDGET: usize = 10_000;

fn check_support(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "minimum support {s} is outside (0, 1]"
        )))
    }
}

fn check_confidence(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "minimum confidence {c} is outside [0, 1]"
        )))
    }
}

fn check_max_size(m: Option<usize>) -> Result<()> {
    if m == Some(0) {
        Err(Error::InvalidArgument(
            "maximum itemset size must be positive".into(),
        ))
    } else {
        Ok(())
    }
}

/// A class association rule `items → class`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    /// Sorted, non-empty.
    #[serde(with = "feature_strings")]
    pub items: Vec<Feature>,
    pub class: String,
    pub support: f64,
    pub confidence: f64,
}

mod feature_strings {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::corpus::Feature;

    pub fn serialize<S: Serializer>(items: &[Feature], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(items.iter().map(|f| f.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Feature>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// The global rule order: support desc, confidence desc, itemset size asc,
/// items lexicographically asc, class asc.
pub fn rule_order(a: &Rule, b: &Rule) -> Ordering {
    b.support
        .total_cmp(&a.support)
        .then_with(|| b.confidence.total_cmp(&a.confidence))
        .then_with(|| a.items.len().cmp(&b.items.len()))
        .then_with(|| a.items.cmp(&b.items))
        .then_with(|| a.class.cmp(&b.class))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequentItemset {
    pub items: Vec<Feature>,
    pub count: usize,
    pub support: f64,
}

pub fn support(items: &ItemSet, transactions: &[Transaction]) -> Result<f64> {
    if transactions.is_empty() {
        return Err(Error::NoTransactions);
    }
    let cover = transactions
        .iter()
        .filter(|t| items.is_subset(&t.items))
        .count();
    Ok(cover as f64 / transactions.len() as f64)
}

pub fn confidence(items: &ItemSet, class: &str, transactions: &[Transaction]) -> Result<f64> {
    let (mut cover, mut hits) = (0usize, 0usize);
    for t in transactions.iter().filter(|t| items.is_subset(&t.items)) {
        cover += 1;
        if t.class == class {
            hits += 1;
        }
    }
    if cover == 0 {
        return Err(Error::UndefinedConfidence);
    }
    Ok(hits as f64 / cover as f64)
}

/// Smallest count whose support `count / n` reaches `sigma`.
fn min_count(sigma: f64, n: usize) -> usize {
    let mut c = ((sigma * n as f64).ceil() as usize).min(n + 1);
    while c > 0 && (c - 1) as f64 / n as f64 >= sigma {
        c -= 1;
    }
    while c <= n && (c as f64 / n as f64) < sigma {
        c += 1;
    }
    c
}

/// Transactions with interned items and class indices.
#[derive(Clone, Debug)]
struct Encoded {
    vocab: Vec<Feature>,
    classes: Vec<String>,
    rows: Vec<Vec<u32>>,
    labels: Vec<u32>,
}

impl Encoded {
    fn new(transactions: &[Transaction]) -> Self {
        let vocab: Vec<Feature> = transactions
            .iter()
            .flat_map(|t| t.items.iter())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .cloned()
            .collect();
        let ids: HashMap<&Feature, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, f)| (f, i as u32))
            .collect();
        let classes: Vec<String> = transactions
            .iter()
            .map(|t| t.class.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let rows = transactions
            .iter()
            .map(|t| t.items.iter().map(|f| ids[f]).collect())
            .collect();
        let labels = transactions
            .iter()
            .map(|t| {
                classes
                    .binary_search(&t.class)
                    .expect("class collected above") as u32
            })
            .collect();
        Encoded {
            vocab,
            classes,
            rows,
            labels,
        }
    }

    fn decode(&self, items: &[u32]) -> Vec<Feature> {
        items
            .iter()
            .map(|&i| self.vocab[i as usize].clone())
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Mined {
    items: Vec<u32>,
    count: u32,
    class_counts: Vec<u32>,
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

struct Eclat<'a> {
    db: &'a Encoded,
    min_count: usize,
    max_size: usize,
}

impl Eclat<'_> {
    fn record(&self, items: Vec<u32>, tids: &[u32], out: &mut Vec<Mined>) {
        let mut class_counts = vec![0u32; self.db.classes.len()];
        for &t in tids {
            class_counts[self.db.labels[t as usize] as usize] += 1;
        }
        out.push(Mined {
            items,
            count: tids.len() as u32,
            class_counts,
        });
    }

    /// Emits `prefix ∪ {ext[i].0}` for every extension and recurses.
    fn grow(&self, prefix: &[u32], ext: &[(u32, Vec<u32>)], out: &mut Vec<Mined>) {
        for (i, (item, tids)) in ext.iter().enumerate() {
            let mut items = prefix.to_vec();
            items.push(*item);
            if items.len() < self.max_size {
                let next: Vec<(u32, Vec<u32>)> = ext[i + 1..]
                    .iter()
                    .filter_map(|(other, other_tids)| {
                        let both = intersect(tids, other_tids);
                        (both.len() >= self.min_count).then_some((*other, both))
                    })
                    .collect();
                self.grow(&items, &next, out);
            }
            self.record(items, tids, out);
        }
    }

    fn run(&self) -> Vec<Mined> {
        let mut tidlists: Vec<Vec<u32>> = vec![Vec::new(); self.db.vocab.len()];
        for (tid, row) in self.db.rows.iter().enumerate() {
            for &item in row {
                tidlists[item as usize].push(tid as u32);
            }
        }
        let singles: Vec<(u32, Vec<u32>)> = tidlists
            .into_iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty() && t.len() >= self.min_count)
            .map(|(i, t)| (i as u32, t))
            .collect();
        // Each top-level branch is independent; results are re-sorted later.
        (0..singles.len())
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                let (item, tids) = &singles[i];
                let items = vec![*item];
                if self.max_size > 1 {
                    let next: Vec<(u32, Vec<u32>)> = singles[i + 1..]
                        .iter()
                        .filter_map(|(other, other_tids)| {
                            let both = intersect(tids, other_tids);
                            (both.len() >= self.min_count).then_some((*other, both))
                        })
                        .collect();
                    self.grow(&items, &next, &mut out);
                }
                self.record(items, tids, &mut out);
                out
            })
            .flatten()
            .collect()
    }
}

fn mine_encoded(db: &Encoded, min_support: f64, max_size: Option<usize>) -> Vec<Mined> {
    let n = db.rows.len();
    if n == 0 {
        return Vec::new();
    }
    let eclat = Eclat {
        db,
        min_count: min_count(min_support, n).max(1),
        max_size: max_size.unwrap_or(usize::MAX),
    };
    eclat.run()
}

/// Every itemset of size `1..=max_size` with support ≥ `min_support`,
/// ordered by support desc, size asc, then items.
pub fn mine_frequent(
    transactions: &[Transaction],
    min_support: f64,
    max_size: Option<usize>,
) -> Result<Vec<FrequentItemset>> {
    check_support(min_support)?;
    check_max_size(max_size)?;
    let db = Encoded::new(transactions);
    let mut mined = mine_encoded(&db, min_support, max_size);
    mined.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.items.len().cmp(&b.items.len()))
            .then_with(|| a.items.cmp(&b.items))
    });
    let n = transactions.len() as f64;
    Ok(mined
        .into_iter()
        .map(|m| FrequentItemset {
            items: db.decode(&m.items),
            count: m.count as usize,
            support: m.count as f64 / n,
        })
        .collect())
}

/// Top `budget` rules in the global order.
pub fn apply_budget(mut rules: Vec<Rule>, budget: usize) -> Vec<Rule> {
    rules.sort_by(rule_order);
    rules.truncate(budget);
    rules
}

/// Rules for every frequent itemset and class whose confidence reaches
/// `min_confidence`, cut down to the rule budget.
pub fn generate_cars(transactions: &[Transaction], cfg: &MineConfig) -> Result<Vec<Rule>> {
    cfg.check()?;
    let pool = RulePool::mine(transactions, cfg.min_support, cfg.max_itemset_size)?;
    Ok(pool
        .rules(cfg.min_support, cfg.min_confidence, cfg.rule_budget)
        .rules)
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    entry: u32,
    class: u32,
    count: u32,
    class_count: u32,
}

/// Frequent itemsets mined once at a floor support, with every
/// `(itemset, class)` pair that has at least one supporting transaction,
/// pre-sorted in the global rule order.
#[derive(Clone, Debug)]
pub struct RulePool {
    db: Encoded,
    floor_support: f64,
    entries: Vec<Mined>,
    candidates: Vec<Candidate>,
}

/// Rules selected from a pool.
#[derive(Clone, Debug)]
pub struct Selection {
    pub rules: Vec<Rule>,
    /// Rules meeting (σ, κ) before the budget cut.
    pub unbudgeted: usize,
}

impl RulePool {
    pub fn mine(
        transactions: &[Transaction],
        floor_support: f64,
        max_size: Option<usize>,
    ) -> Result<Self> {
        if transactions.is_empty() {
            return Err(Error::NoTransactions);
        }
        check_support(floor_support)?;
        check_max_size(max_size)?;
        let db = Encoded::new(transactions);
        let entries = mine_encoded(&db, floor_support, max_size);
        let mut candidates: Vec<Candidate> = entries
            .iter()
            .enumerate()
            .flat_map(|(e, m)| {
                m.class_counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &cc)| cc > 0)
                    .map(move |(c, &cc)| Candidate {
                        entry: e as u32,
                        class: c as u32,
                        count: m.count,
                        class_count: cc,
                    })
            })
            .collect();
        candidates.par_sort_unstable_by(|a, b| {
            let (ea, eb) = (&entries[a.entry as usize], &entries[b.entry as usize]);
            b.count
                .cmp(&a.count)
                .then_with(|| conf(b).total_cmp(&conf(a)))
                .then_with(|| ea.items.len().cmp(&eb.items.len()))
                .then_with(|| ea.items.cmp(&eb.items))
                .then_with(|| a.class.cmp(&b.class))
        });
        Ok(RulePool {
            db,
            floor_support,
            entries,
            candidates,
        })
    }

    pub fn num_transactions(&self) -> usize {
        self.db.rows.len()
    }

    pub fn floor_support(&self) -> f64 {
        self.floor_support
    }

    /// Number of rules meeting `(σ, κ)` before any budget.
    pub fn count(&self, min_support: f64, min_confidence: f64) -> usize {
        let mc = min_count(min_support.max(self.floor_support), self.num_transactions()) as u32;
        self.candidates
            .iter()
            .filter(|c| c.count >= mc && conf(c) >= min_confidence)
            .count()
    }

    /// Rules meeting `(σ, κ)`, top `budget` in the global order. Supports
    /// below the pool's floor are clamped to the floor.
    pub fn rules(&self, min_support: f64, min_confidence: f64, budget: usize) -> Selection {
        let n = self.num_transactions();
        let mc = min_count(min_support.max(self.floor_support), n) as u32;
        let mut rules = Vec::new();
        let mut unbudgeted = 0;
        for c in &self.candidates {
            // Candidates are sorted by count first, so nothing later qualifies.
            if c.count < mc {
                break;
            }
            let confidence = conf(c);
            if confidence < min_confidence {
                continue;
            }
            unbudgeted += 1;
            if rules.len() < budget {
                let entry = &self.entries[c.entry as usize];
                rules.push(Rule {
                    items: self.db.decode(&entry.items),
                    class: self.db.classes[c.class as usize].clone(),
                    support: c.count as f64 / n as f64,
                    confidence,
                });
            }
        }
        Selection { rules, unbudgeted }
    }
}

fn conf(c: &Candidate) -> f64 {
    c.class_count as f64 / c.count as f64
}

/// One evaluated `(σ, κ)` grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub min_support: f64,
    pub min_confidence: f64,
    pub rules: usize,
    /// `None` when the point yields no rules.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tuning {
    pub min_support: f64,
    pub min_confidence: f64,
    pub score: f64,
    pub grid: Vec<GridPoint>,
}

/// Grid search over `(σ, κ)` under a fixed rule budget.
///
/// Every point mines, budgets and hands its rules to `scorer`. Points with
/// no rules are infeasible. The best score wins; ties go to the larger σ,
/// then the larger κ.
pub fn tune<F>(
    train: &[Transaction],
    budget: usize,
    support_grid: &[f64],
    confidence_grid: &[f64],
    max_size: Option<usize>,
    scorer: F,
) -> Result<Tuning>
where
    F: Fn(&[Rule]) -> f64 + Sync,
{
    if support_grid.is_empty() || confidence_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "tuning grids must be non-empty".into(),
        ));
    }
    for &s in support_grid {
        check_support(s)?;
    }
    for &c in confidence_grid {
        check_confidence(c)?;
    }
    let floor = support_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let pool = RulePool::mine(train, floor, max_size)?;
    let points: Vec<(f64, f64)> = support_grid
        .iter()
        .flat_map(|&s| confidence_grid.iter().map(move |&c| (s, c)))
        .collect();
    let grid: Vec<GridPoint> = points
        .par_iter()
        .map(|&(s, c)| {
            let sel = pool.rules(s, c, budget);
            let score = (!sel.rules.is_empty()).then(|| scorer(&sel.rules));
            GridPoint {
                min_support: s,
                min_confidence: c,
                rules: sel.rules.len(),
                score,
            }
        })
        .collect();
    let best = grid
        .iter()
        .filter_map(|p| p.score.map(|s| (p, s)))
        .max_by(|(a, sa), (b, sb)| {
            sa.total_cmp(sb)
                .then_with(|| a.min_support.total_cmp(&b.min_support))
                .then_with(|| a.min_confidence.total_cmp(&b.min_confidence))
        })
        .map(|(p, s)| (p.min_support, p.min_confidence, s));
    let Some((min_support, min_confidence, score)) = best else {
        return Err(Error::NoFeasibleConfiguration);
    };
    Ok(Tuning {
        min_support,
        min_confidence,
        score,
        grid,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub min_support: f64,
    /// Rules meeting (σ, κ) before the budget cut.
    pub rule_count: usize,
    /// Score of the budgeted rules; 0 when there are none.
    pub score: f64,
    /// Set when no rules were mined and the score was not computed.
    pub abstained: bool,
}

/// Rule count and score along a support sweep at fixed confidence, in
/// descending σ order.
pub fn rule_count_curve<F>(
    train: &[Transaction],
    min_confidence: f64,
    support_grid: &[f64],
    budget: usize,
    max_size: Option<usize>,
    scorer: F,
) -> Result<Vec<CurvePoint>>
where
    F: Fn(&[Rule]) -> f64 + Sync,
{
    if support_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "support grid must be non-empty".into(),
        ));
    }
    check_confidence(min_confidence)?;
    for &s in support_grid {
        check_support(s)?;
    }
    let mut grid = support_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let floor = *grid.last().expect("non-empty");
    let pool = RulePool::mine(train, floor, max_size)?;
    Ok(grid
        .par_iter()
        .map(|&s| {
            let sel = pool.rules(s, min_confidence, budget);
            let abstained = sel.rules.is_empty();
            CurvePoint {
                min_support: s,
                rule_count: sel.unbudgeted,
                score: if abstained { 0.0 } else { scorer(&sel.rules) },
                abstained,
            }
        })
        .collect())
}

/// `class<TAB>support<TAB>confidence<TAB>item,item,...` per rule.
pub fn write_rules(rules: &[Rule]) -> String {
    let mut out = String::new();
    for r in rules {
        let items: Vec<String> = r.items.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.class,
            r.support,
            r.confidence,
            items.join(",")
        );
    }
    out
}

/// Reads the rule export format back. `#` lines are comments.
pub fn parse_rules(text: &str, file: &str) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                file,
                line_no,
                "columns",
                "expected class, support, confidence, items",
            ));
        }
        let num = |field: &str, v: &str| -> Result<f64> {
            match v.parse::<f64>() {
                Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
                _ => Err(Error::parse(
                    file,
                    line_no,
                    field,
                    format!("`{v}` is not in [0, 1]"),
                )),
            }
        };
        let mut items = cols[3]
            .split(',')
            .map(|s| {
                s.parse::<Feature>()
                    .map_err(|e| Error::parse(file, line_no, "items", e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        items.sort();
        items.dedup();
        rules.push(Rule {
            class: cols[0].to_owned(),
            support: num("support", cols[1])?,
            confidence: num("confidence", cols[2])?,
            items,
        });
    }
    Ok(rules)
}

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use depcar_core::corpus::{read_corpus, root_overlap_report, validate, Corpus, PosTable};
use depcar_core::eval::{
    emit_table, kfold_split, rule_count_sweep, rule_curve_csv, run_experiment, sweep_tfidf_n,
    tfidf_curve_csv, ClassifierKind, Experiment, Layout,
};
use depcar_core::featsel::{
    document_transactions, parse_transactions, write_transactions, TransactionSet,
};
use depcar_core::rulemine::{generate_cars, write_rules, MineConfig};

use crate::config::ExperimentConfig;
use crate::{CliError, Command, SweepKind};

type Res = Result<i32, CliError>;

pub(crate) fn dispatch(
    cmd: &Command,
    cfg: &ExperimentConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Res {
    match cmd {
        Command::Validate { overlap } => cmd_validate(cfg, *overlap, out),
        Command::Features => cmd_features(cfg, out, err),
        Command::Mine { transactions } => cmd_mine(cfg, transactions.as_deref(), out, err),
        Command::Evaluate { both } => cmd_evaluate(cfg, *both, out),
        Command::Sweep { kind, n_max } => cmd_sweep(cfg, *kind, *n_max, out),
    }
}

fn pos_table(cfg: &ExperimentConfig) -> Result<PosTable, CliError> {
    Ok(match &cfg.pos_map {
        Some(p) => PosTable::load(p)?,
        None => PosTable::penn_arabic(),
    })
}

fn corpus_path(cfg: &ExperimentConfig) -> Result<&Path, CliError> {
    cfg.corpus.as_deref().ok_or_else(|| {
        CliError::Usage("no corpus given (use --corpus or `corpus` in the config)".into())
    })
}

/// Parses without the tree check, so violations can be reported.
fn read(cfg: &ExperimentConfig) -> Result<Corpus, CliError> {
    Ok(read_corpus(
        corpus_path(cfg)?,
        cfg.format,
        cfg.tau,
        &pos_table(cfg)?,
    )?)
}

/// Parses and refuses invalid corpora.
fn load(cfg: &ExperimentConfig) -> Result<Corpus, CliError> {
    let c = read(cfg)?;
    let report = validate(&c);
    if !report.is_clean() {
        return Err(CliError::Data(format!("invalid corpus:\n{report}")));
    }
    Ok(c)
}

/// Writes `name` under the output directory, or to `out` without one.
fn emit(
    cfg: &ExperimentConfig,
    name: &str,
    body: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Io {
                path: dir.clone(),
                source: e,
            })?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::Io { path, source: e })
        }
        None => out.write_all(body.as_bytes()).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn cmd_validate(cfg: &ExperimentConfig, overlap: bool, out: &mut dyn Write) -> Res {
    let c = read(cfg)?;
    let report = validate(&c);
    let mut body = String::new();
    if report.is_clean() {
        let _ = writeln!(
            body,
            "ok: {} documents, {} sentences, {} classes",
            c.documents.len(),
            c.num_sentences(),
            c.classes.len()
        );
        if overlap {
            let _ = write!(body, "{}", root_overlap_report(&c)?);
        }
    } else {
        let _ = write!(body, "{report}");
    }
    out.write_all(body.as_bytes()).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    Ok(if report.is_clean() { 0 } else { 1 })
}

fn cmd_features(cfg: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let c = load(cfg)?;
    let set = TransactionSet::from_documents(&document_transactions(&c, cfg.strategy, cfg.tau))?;
    let mut body = cfg.header("features");
    body.push_str(&write_transactions(&set.transactions));
    let summary = format!(
        "AvgTransSize={:.2}\ntransactions={}\nskipped={}\n",
        set.avg_transaction_size,
        set.transactions.len(),
        set.skipped
    );
    for line in summary.lines() {
        let _ = writeln!(body, "# {line}");
    }
    emit(cfg, "transactions.tsv", &body, out)?;
    let _ = err.write_all(summary.as_bytes());
    Ok(0)
}

fn cmd_mine(
    cfg: &ExperimentConfig,
    transactions: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Res {
    let t = match transactions {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io {
                path: p.to_owned(),
                source: e,
            })?;
            parse_transactions(&text, &p.display().to_string())?
        }
        None => {
            let c = load(cfg)?;
            TransactionSet::from_documents(&document_transactions(&c, cfg.strategy, cfg.tau))?
                .transactions
        }
    };
    let mine = MineConfig {
        min_support: cfg.eval.min_support.unwrap_or(cfg.mine.min_support),
        min_confidence: cfg.eval.min_confidence.unwrap_or(cfg.mine.min_confidence),
        rule_budget: cfg.eval.rule_budget,
        max_itemset_size: None,
    };
    let rules = generate_cars(&t, &mine)?;
    let mut body = cfg.header("mine");
    body.push_str(&write_rules(&rules));
    emit(cfg, "rules.tsv", &body, out)?;
    if rules.is_empty() {
        let _ = writeln!(
            err,
            "no rules at σ={} κ={}; try a lower --min-support or --min-confidence",
            mine.min_support, mine.min_confidence
        );
        return Ok(1);
    }
    let _ = writeln!(err, "{} rules", rules.len());
    Ok(0)
}

fn experiments(
    cfg: &ExperimentConfig,
    c: &Corpus,
    kinds: &[ClassifierKind],
) -> Result<Vec<Experiment>, CliError> {
    let plan = kfold_split(c, cfg.folds, cfg.seed, cfg.stratified)?;
    kinds
        .iter()
        .map(|&k| Ok(run_experiment(c, cfg.strategy, k, &cfg.eval, &plan)?))
        .collect()
}

fn predictions_tsv(header: &str, experiments: &[Experiment]) -> String {
    let mut s = header.to_owned();
    s.push_str("classifier\tdocument\tsentence\tfold\tgold\tpredicted\tabstained\n");
    for e in experiments {
        let clf = e
            .metrics
            .annotations
            .classifier
            .map(|k| k.to_string())
            .unwrap_or_default();
        for p in &e.predictions {
            let sentence = p
                .sentence
                .map(|n| n.to_string())
                .unwrap_or_else(|| "_".into());
            let _ = writeln!(
                s,
                "{clf}\t{}\t{sentence}\t{}\t{}\t{}\t{}",
                p.document, p.fold, p.gold, p.predicted, p.abstained
            );
        }
    }
    s
}

fn folds_tsv(header: &str, experiments: &[Experiment]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "_".into());
    let mut s = header.to_owned();
    s.push_str(
        "classifier\tfold\ttrain_transactions\tmin_support\tmin_confidence\trules\ttuning_score\n",
    );
    for e in experiments {
        let clf = e
            .metrics
            .annotations
            .classifier
            .map(|k| k.to_string())
            .unwrap_or_default();
        for f in &e.folds {
            let _ = writeln!(
                s,
                "{clf}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.fold,
                f.train_transactions,
                opt(f.min_support),
                opt(f.min_confidence),
                f.rules.map(|r| r.to_string()).unwrap_or_else(|| "_".into()),
                opt(f.tuning_score)
            );
        }
    }
    s
}

fn cmd_evaluate(cfg: &ExperimentConfig, both: bool, out: &mut dyn Write) -> Res {
    let c = load(cfg)?;
    let kinds = if both {
        vec![ClassifierKind::Car, ClassifierKind::Svm]
    } else {
        vec![cfg.classifier]
    };
    let exps = experiments(cfg, &c, &kinds)?;
    let metrics: Vec<_> = exps.iter().map(|e| e.metrics.clone()).collect();
    let header = cfg.header("evaluate");
    let table = format!(
        "{header}{}",
        emit_table(&metrics, Layout::PaperTable, cfg.eval.average)
    );
    if cfg.out_dir.is_some() {
        let csv = format!(
            "{header}{}",
            emit_table(&metrics, Layout::Csv, cfg.eval.average)
        );
        let json = serde_json::json!({
            "header": header,
            "config": cfg,
            "metrics": metrics,
        });
        let json = serde_json::to_string_pretty(&json).expect("serializable") + "\n";
        emit(cfg, "table.txt", &table, out)?;
        emit(cfg, "metrics.csv", &csv, out)?;
        emit(cfg, "metrics.json", &json, out)?;
        emit(
            cfg,
            "predictions.tsv",
            &predictions_tsv(&header, &exps),
            out,
        )?;
        emit(cfg, "folds.tsv", &folds_tsv(&header, &exps), out)?;
    }
    out.write_all(table.as_bytes()).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    Ok(0)
}

fn cmd_sweep(
    cfg: &ExperimentConfig,
    kind: SweepKind,
    n_max: Option<usize>,
    out: &mut dyn Write,
) -> Res {
    let c = load(cfg)?;
    let plan = kfold_split(&c, cfg.folds, cfg.seed, cfg.stratified)?;
    let header = cfg.header("sweep");
    let (name, body) = match kind {
        SweepKind::TfidfN => {
            let range: Vec<usize> = match n_max {
                Some(n) => (1..=n).collect(),
                None => cfg.sweep.tfidf_n.clone(),
            };
            if range.is_empty() || range.contains(&0) {
                return Err(CliError::Usage("tf-idf N values must be positive".into()));
            }
            let points = sweep_tfidf_n(&c, cfg.classifier, &cfg.eval, &range, &plan)?;
            ("sweep-tfidf-n.csv", tfidf_curve_csv(&points))
        }
        SweepKind::RuleCount => {
            let grid = if cfg.sweep.support_grid.is_empty() {
                &cfg.eval.support_grid
            } else {
                &cfg.sweep.support_grid
            };
            let kappa = cfg.eval.min_confidence.unwrap_or(cfg.sweep.confidence);
            let points = rule_count_sweep(
                &c,
                cfg.strategy,
                &cfg.eval,
                &plan,
                cfg.sweep.eval_fold,
                kappa,
                grid,
            )?;
            ("sweep-rule-count.csv", rule_curve_csv(&points))
        }
    };
    emit(cfg, name, &format!("{header}{body}"), out)?;
    Ok(0)
}

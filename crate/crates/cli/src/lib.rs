//! Batch experiments over dependency-annotated corpora: validation, feature
//! dumps, rule mining, cross-validated evaluation and parameter sweeps.
//!
//! [`run`] parses arguments and returns the process exit code: 0 on
//! success, 1 when the data is at fault, 2 for usage and I/O errors.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depcar_core::corpus::{Format, Tau};
use depcar_core::eval::{Average, ClassifierKind, EvalLevel, SvmFeatures};
use depcar_core::featsel::StrategySpec;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] depcar_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use depcar_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Data(_) => 1,
            CliError::Core(e) => match e {
                E::Io { .. } | E::InvalidArgument(_) | E::NotRootified => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "depcar",
    version,
    about = "Dependency-syntax features and class association rules for text classification"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides for the config file; flags win.
#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// native or conllu.
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// stem or root.
    #[arg(long, global = true)]
    pub tau: Option<Tau>,
    /// tfidf:N, head-only, nouns-dist1, head-nouns:D, head-all-nouns,
    /// head-all-nouns-verbs (or I, II, III1-III3, IV, IV').
    #[arg(long, global = true)]
    pub strategy: Option<StrategySpec>,
    /// car or svm.
    #[arg(long, global = true)]
    pub classifier: Option<ClassifierKind>,
    #[arg(long, global = true)]
    pub rule_budget: Option<usize>,
    /// Fixes σ instead of tuning it.
    #[arg(long, global = true)]
    pub min_support: Option<f64>,
    /// Fixes κ instead of tuning it.
    #[arg(long, global = true)]
    pub min_confidence: Option<f64>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// FINE<TAB>COARSE POS mapping file.
    #[arg(long, global = true)]
    pub pos_map: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// sentence or document.
    #[arg(long, global = true)]
    pub level: Option<EvalLevel>,
    /// macro or weighted.
    #[arg(long, global = true)]
    pub average: Option<Average>,
    /// SVM feature values: binary or tfidf.
    #[arg(long, global = true)]
    pub svm_features: Option<SvmFeatures>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check tree and label invariants of a corpus.
    Validate {
        /// Also print the per-class root overlap table (requires --tau root).
        #[arg(long)]
        overlap: bool,
    },
    /// Dump one transaction per sentence under the chosen strategy.
    Features,
    /// Mine class association rules.
    Mine {
        /// Read a transaction dump instead of extracting from --corpus.
        #[arg(long)]
        transactions: Option<PathBuf>,
    },
    /// Cross-validated evaluation.
    Evaluate {
        /// Run both classifiers, CAR first.
        #[arg(long)]
        both: bool,
    },
    /// F-measure curves.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Sweep tf-idf N over 1..=N_MAX.
        #[arg(long)]
        n_max: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    TfidfN,
    RuleCount,
}

impl GlobalArgs {
    /// Config file (if any) with flag overrides applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = &self.$flag {
                    c.$($field).+ = v.clone().into();
                }
            };
        }
        set!(corpus => corpus);
        set!(format => format);
        set!(tau => tau);
        set!(strategy => strategy);
        set!(classifier => classifier);
        set!(rule_budget => eval.rule_budget);
        set!(min_support => eval.min_support);
        set!(min_confidence => eval.min_confidence);
        set!(folds => folds);
        set!(seed => seed);
        set!(workers => workers);
        set!(pos_map => pos_map);
        set!(out_dir => out_dir);
        set!(level => eval.level);
        set!(average => eval.average);
        set!(svm_features => eval.svm_features);
        c.eval.svm.seed = c.seed;
        Ok(c)
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// results to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = cli.global.resolve().and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        // Buffered so the closure is Send.
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let result = pool.install(|| commands::dispatch(&cli.command, &cfg, &mut o, &mut e));
        let _ = out.write_all(&o);
        let _ = err.write_all(&e);
        result
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

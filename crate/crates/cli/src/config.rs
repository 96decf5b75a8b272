use std::fs;
use std::path::{Path, PathBuf};

use depcar_core::corpus::{Format, Tau};
use depcar_core::eval::{ClassifierKind, EvalConfig};
use depcar_core::featsel::StrategySpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything an experiment depends on. Every field has a default, so an
/// empty file is a valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: Option<PathBuf>,
    pub format: Format,
    pub tau: Tau,
    pub strategy: StrategySpec,
    pub classifier: ClassifierKind,
    /// FINE<TAB>COARSE table; the built-in Penn Arabic mapping otherwise.
    pub pos_map: Option<PathBuf>,
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Thread count; not echoed into artifacts since results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    /// Artifacts go to stdout when unset.
    pub out_dir: Option<PathBuf>,
    pub eval: EvalConfig,
    pub mine: MineDefaults,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            format: Format::Native,
            tau: Tau::Root,
            strategy: StrategySpec::HeadPlusNouns(2),
            classifier: ClassifierKind::Car,
            pos_map: None,
            folds: 10,
            seed: 0,
            stratified: true,
            workers: None,
            out_dir: None,
            eval: EvalConfig::default(),
            mine: MineDefaults::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Thresholds used by `mine` when σ or κ are not fixed in `[eval]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineDefaults {
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for MineDefaults {
    fn default() -> Self {
        MineDefaults {
            min_support: 0.01,
            min_confidence: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// N values of the tf-idf sweep.
    pub tfidf_n: Vec<usize>,
    /// κ held fixed by the rule-count sweep.
    pub confidence: f64,
    /// σ values of the rule-count sweep; `[eval].support_grid` when empty.
    pub support_grid: Vec<f64>,
    /// Fold scored by the rule-count sweep; the others are mined.
    pub eval_fold: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tfidf_n: (1..=20).collect(),
            confidence: 0.5,
            support_grid: Vec::new(),
            eval_fold: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// `#`-prefixed TOML rendering of the config, for artifact headers.
    pub fn header(&self, command: &str) -> String {
        let body = toml::to_string(self).expect("config serializes");
        let mut out = format!("# depcar {} {command}\n", env!("CARGO_PKG_VERSION"));
        for line in body.lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig {
            corpus: Some("data/kalimat.native".into()),
            ..ExperimentConfig::default()
        };
        c.eval.min_support = Some(0.004);
        c.strategy = StrategySpec::TfidfTopN(7);
        let text = toml::to_string(&c).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("strategie = \"head-only\"").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[eval]\nbudget = 3").is_err());
    }

    #[test]
    fn header_lines_are_comments() {
        let h = ExperimentConfig::default().header("evaluate");
        assert!(h.lines().all(|l| l.starts_with('#')));
        assert!(h.contains("strategy = \"head-nouns:2\""));
        assert!(!h.contains("workers"));
    }
}

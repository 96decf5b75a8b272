use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed input line. `field` names the offending column or construct.
    #[error("{file}:{line}: {field}: {message}")]
    Parse {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("corpus failed validation:\n{0}")]
    InvalidCorpus(ValidationReport),

    #[error("report requires rootified corpus")]
    NotRootified,

    #[error("strategy yields empty corpus")]
    EmptyStrategyOutput,

    #[error("transaction list is empty")]
    NoTransactions,

    #[error("undefined confidence: itemset is contained in no transaction")]
    UndefinedConfidence,

    #[error("no feasible configuration: every grid point yields zero rules")]
    NoFeasibleConfiguration,

    #[error("class `{class}` has {count} documents, fewer than the {folds} requested folds")]
    TooFewDocuments {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("training data holds a single class `{0}`; at least two are required")]
    SingleClass(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn parse(
        file: &str,
        line: usize,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            file: file.to_owned(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

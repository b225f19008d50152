use std::path::PathBuf;

/// Errors raised across the crate.
///
/// Variants map onto the two exit classes used by the command-line driver:
/// bad input (validation) versus failures inside a computation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("ingestion error for entity {entity} at date {date}: {reason}")]
    Ingestion {
        entity: String,
        date: String,
        reason: String,
    },

    #[error("metadata error: {0}")]
    Metadata(String),

    #[error("validation error at row {row}: {reason}")]
    Validation { row: usize, reason: String },

    #[error("fit error for order (p={p}, q={q}): {reason}")]
    ArimaFit { p: usize, q: usize, reason: String },

    #[error("logistic fit error: {0}")]
    LogisticFit(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("matching error: {0}")]
    Matching(String),

    #[error("import error at line {line}: {reason}")]
    Import { line: usize, reason: String },

    #[error("sentiment provider error: {0}")]
    Sentiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: png::EncodingError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by malformed or inconsistent user input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Argument(_)
                | Error::Ingestion { .. }
                | Error::Metadata(_)
                | Error::Validation { .. }
                | Error::Import { .. }
                | Error::Sentiment(_)
                | Error::Csv { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Ingestion { .. } => "ingestion",
            Error::Metadata(_) => "metadata",
            Error::Validation { .. } => "validation",
            Error::ArimaFit { .. } => "arima_fit",
            Error::LogisticFit(_) => "logistic_fit",
            Error::Metric(_) => "metric",
            Error::Sampling(_) => "sampling",
            Error::Matching(_) => "matching",
            Error::Import { .. } => "import",
            Error::Sentiment(_) => "sentiment",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::Png { .. } => "png",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

/// Errors produced across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data failed structural validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A code does not describe a network on the stated node count.
    #[error("malformed code: {0}")]
    MalformedCode(String),

    /// A regression or ANOVA design has too few observations.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// One or more regions have zero variance across subjects.
    #[error("zero-variance regions: {}", .0.join(", "))]
    ZeroVariance(Vec<String>),

    /// A metric has no defined value on this network.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// The small-world index cannot be estimated.
    #[error("small-world index not estimable: {0}")]
    NotEstimable(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the statistics rather than of the input files.
    pub fn is_degenerate_statistics(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDesign(_)
                | Error::ZeroVariance(_)
                | Error::UndefinedMetric(_)
                | Error::NotEstimable(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error with a stable machine-readable category.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    /// Invalid configuration (hyperparameters, sizes, ranges).
    #[error("config error: {0}")]
    Config(String),

    /// Some observations are never out of bag; the estimators are undefined.
    #[error(
        "insufficient trees: observation rows {rows:?} have no out-of-bag trees; \
         grow more trees (at least B/0.632 \u{2248} {suggested} for the current fit)"
    )]
    InsufficientTrees { rows: Vec<usize>, suggested: usize },

    /// Numerical failure (degenerate denominator, non-finite intermediate).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Interval transform not applicable to the given point estimate.
    #[error("transform error: {0}")]
    Transform(String),

    /// A derivative was requested for a loss that has none.
    #[error("non-differentiable loss: {0}")]
    NonDifferentiableLoss(String),

    /// An error raised inside one simulation replicate.
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short category token, stable for scripting against the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::InsufficientTrees { .. } => "insufficient-trees",
            Error::Numeric(_) => "numeric",
            Error::Transform(_) => "transform",
            Error::NonDifferentiableLoss(_) => "non-differentiable-loss",
            Error::Replicate { source, .. } => source.category(),
            Error::Io(_) => "io",
            Error::Csv(_) => "input",
            Error::Json(_) => "input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

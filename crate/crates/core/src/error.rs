use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("pattern enumeration needs J <= {max}, got J = {requested}")]
    Capability { requested: usize, max: usize },

    /// A 2x2 cell probability is zero, so the log odds ratio is +/- infinity.
    #[error("log odds ratio for dimensions ({j}, {l}) is infinite: cell ({a}, {b}) has probability 0")]
    InfiniteLogOdds {
        j: usize,
        l: usize,
        a: u8,
        b: u8,
    },

    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: String, detail: String },

    #[error("{operation} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        operation: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("variance is zero or undefined in {0}")]
    UndefinedVariance(&'static str),

    #[error("pattern {0} not observed among cases")]
    PatternNotFound(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// Attach chain/iteration context to a sampler failure.
    pub(crate) fn in_sampler(self, chain: usize, iteration: usize) -> Self {
        match self {
            Error::Numeric { context, detail } => Error::Numeric {
                context: format!("chain {chain}, iteration {iteration}: {context}"),
                detail,
            },
            other => other,
        }
    }
}

use thiserror::Error;

/// Errors raised anywhere in the pricing, training and calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cumulant overflow")]
    CumulantOverflow,

    #[error("interval adaptation failed after {0} widenings")]
    IntervalAdaptation(u32),

    #[error("pricing diverged")]
    PricingDiverged,

    #[error("quote {index}: {source}")]
    Quote {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no implied vol: price {price} outside no-arbitrage band ({lower}, {upper})")]
    NoImpliedVol { price: f64, lower: f64, upper: f64 },

    #[error("bracket failure: root not bracketed in [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("root finder did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("degenerate ranges: {dropped} of {requested} samples dropped")]
    DegenerateRanges { dropped: usize, requested: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {0}")]
    TrainingDiverged(usize),

    #[error("R² undefined: targets have zero variance")]
    UndefinedR2,

    #[error("objective invalid on search space")]
    ObjectiveInvalid,

    #[error("infeasible stencil: {0}")]
    InfeasibleStencil(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub fn at_quote(self, index: usize) -> Self {
        Error::Quote {
            index,
            source: Box::new(self),
        }
    }

    /// True for failures that stem from numerics rather than bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Quote { source, .. } => source.is_numeric(),
            Error::CumulantOverflow
            | Error::IntervalAdaptation(_)
            | Error::PricingDiverged
            | Error::NoImpliedVol { .. }
            | Error::BracketFailure { .. }
            | Error::NoConvergence(_)
            | Error::DegenerateRanges { .. }
            | Error::TrainingDiverged(_)
            | Error::UndefinedR2
            | Error::ObjectiveInvalid
            | Error::InfeasibleStencil(_) => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

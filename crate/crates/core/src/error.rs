use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("non-positive price {close} on {date}")]
    NonPositivePrice { date: NaiveDate, close: f64 },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("no observations")]
    Empty,

    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters outside the feasible region, or a non-positive variance
    /// reached during a recursion. The optimizer treats this as a rejection.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("parameter on the boundary: {0}; nudge it into the interior")]
    Boundary(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("degenerate support: all values identical")]
    DegenerateSupport,

    #[error("autocorrelation undefined for a constant series")]
    UndefinedAutocorrelation,
}

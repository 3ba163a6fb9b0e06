use thiserror::Error;

use crate::numerics::LstsqError;

#[derive(Debug, Error)]
pub enum BapcError {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("index range [{first}, {last}] outside series [{start}, {end}]")]
    Range { first: i64, last: i64, start: i64, end: i64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("missing lagged residuals for t={t} (order {order})")]
    MissingLags { t: i64, order: usize },
    #[error("closed form limited to t <= {max} (got t={t}); use quadrature instead")]
    Precision { t: i64, max: i64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<LstsqError> for BapcError {
    fn from(e: LstsqError) -> Self {
        BapcError::Fit(e.to_string())
    }
}

impl From<csv::Error> for BapcError {
    fn from(e: csv::Error) -> Self {
        BapcError::Format(e.to_string())
    }
}

impl BapcError {
    /// True for errors caused by the caller's inputs or configuration rather
    /// than by a numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            BapcError::InvalidSeries(_)
                | BapcError::Range { .. }
                | BapcError::Config(_)
                | BapcError::Format(_)
                | BapcError::Io(_)
                | BapcError::Json(_)
        )
    }
}

pub type Result<T, E = BapcError> = std::result::Result<T, E>;

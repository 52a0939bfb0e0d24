use thiserror::Error;

use crate::model::UtilityFamily;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument is outside its admissible domain. `field` is a
    /// dotted path (`insurance.eta2`, `risk_aversion.points[1]`, ...).
    #[error("invalid {field}: {reason}")]
    Domain { field: String, reason: String },

    #[error("delay constants infeasible: {0}")]
    Infeasible(String),

    #[error("operation requires the {expected} family, got {actual}")]
    FamilyMismatch {
        expected: UtilityFamily,
        actual: UtilityFamily,
    },

    #[error("wealth {x} is below the fraction floor {floor}; use the amount form")]
    NearZeroWealth { x: f64, floor: f64 },

    #[error("time {t} outside [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("solution exploded at t = {t}; no values before that time")]
    Exploded { t: f64 },

    #[error("floating-point overflow evaluating {0}")]
    Overflow(&'static str),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

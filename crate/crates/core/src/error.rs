use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value was passed to a function outside the region where it is defined.
    #[error("{quantity} = {value} is outside the domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: String,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// An inverse produced a value that falls outside the forward map's domain.
    #[error("{quantity} for utility {utility} would be {value}, outside {domain}")]
    OutOfRange {
        quantity: &'static str,
        utility: f64,
        value: f64,
        domain: String,
    },

    #[error("degenerate emissions table: {0}")]
    DegenerateTable(String),

    #[error("reduction {requested} exceeds the largest achievable latency reduction {max}")]
    InfeasibleReduction { requested: f64, max: f64 },

    #[error("target reduction {target} exceeds the reduction cap {cap}")]
    InvalidTarget { target: f64, cap: f64 },

    #[error("intensity series is empty")]
    EmptySeries,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: String },

    #[error("line {line}: carbon intensity must be positive, got {value}")]
    NonPositiveIntensity { line: u64, value: f64 },

    #[error("unsupported output format {0:?} (expected csv or json)")]
    UnsupportedFormat(String),

    #[error("{0}")]
    Serialize(String),
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

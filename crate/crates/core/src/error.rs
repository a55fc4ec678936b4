use thiserror::Error;

use crate::behavior::ValidationReport;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("behavior violates constraints: {0}")]
    Invalid(ValidationReport),

    #[error("catalog entry {index} (class {class}) rejected: {report}")]
    CatalogEntry {
        index: usize,
        class: u32,
        report: ValidationReport,
    },

    #[error("unknown box name `{0}`")]
    UnknownBox(String),

    #[error("parameter `{name}` out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("party count mismatch: expected {expected}, found {found}")]
    PartyMismatch { expected: usize, found: usize },

    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` appears more than once")]
    DuplicateVariable(String),

    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),

    #[error("empty variable set")]
    EmptySet,

    #[error("distribution is not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("variable `{name}` has cardinality {cardinality}, expected {expected}")]
    Cardinality {
        name: String,
        cardinality: u32,
        expected: u32,
    },

    #[error("conditioning event `{0}` has zero probability")]
    ZeroProbabilityEvent(String),

    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),

    #[error("criterion `{criterion}` is unavailable: {reason}")]
    Unsupported {
        criterion: &'static str,
        reason: String,
    },

    #[error("exact enumeration cap exceeded: {0}")]
    EnumerationCap(String),

    #[error("no boundary on ray for `{criterion}` at epsilon_slice={epsilon}")]
    NoBoundary { criterion: String, epsilon: f64 },

    #[error("catalog class ids missing: {0:?}")]
    MissingClasses(Vec<u32>),

    #[error("duplicate catalog class id {0}")]
    DuplicateClass(u32),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

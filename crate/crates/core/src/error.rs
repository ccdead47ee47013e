use thiserror::Error;

use crate::graph::ElementId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Engine errors shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown element `{0}`")]
    Lookup(ElementId),

    #[error("element `{0}` already exists or was retired")]
    Duplicate(ElementId),

    #[error("structure error at `{element}`: {reason}")]
    Structure { element: ElementId, reason: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("kind error: {0}")]
    Kind(String),

    #[error("cannot undo a superposed contribution of certainty")]
    UndoCertainty,

    #[error("ledger corruption: value {value} is below the contribution {contribution} being undone")]
    LedgerCorruption { value: f64, contribution: f64 },

    #[error("conflict: `{0}` is suppressed")]
    Conflict(ElementId),

    #[error("growth blocked: `{0}` is suppressed in this task")]
    GrowthBlocked(ElementId),

    #[error("nested matching exceeded depth limit {0}")]
    Depth(usize),

    #[error("{line}:{column}: {reason}")]
    Parse { line: usize, column: usize, reason: String },

    #[error("load error at byte {offset}: {reason}")]
    Load { offset: usize, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn structure(element: &ElementId, reason: impl Into<String>) -> Self {
        Error::Structure { element: element.clone(), reason: reason.into() }
    }
}

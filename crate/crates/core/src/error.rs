use std::fmt;

use crate::bipartite::Violation;

/// Which side of the bipartite network a label or margin belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Agents (rows of the incidence matrix).
    Row,
    /// Artifacts (columns of the incidence matrix).
    Column,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Row => f.write_str("agent"),
            Axis::Column => f.write_str("artifact"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("incidence matrix needs at least one agent and one artifact")]
    EmptyDimension,

    #[error("duplicate {axis} label {label:?}")]
    DuplicateLabel { axis: Axis, label: String },

    #[error("cell ({row}, {col}) holds {value}, expected 0 or 1")]
    NonBinaryCell { row: usize, col: usize, value: u8 },

    #[error("{} constraint violation(s), first at {}", .0.len(), .0[0])]
    ConstraintViolation(Vec<Violation>),

    #[error("no free cells to fit the null model on")]
    NoFreeCells,

    #[error("logistic fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("agent pair ({0}, {0}) is a self-pair")]
    SelfPair(usize),

    #[error("{axis} index {index} out of range (size {size})")]
    IndexOutOfRange { axis: Axis, index: usize, size: usize },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("row margins total {rows} but column margins total {cols}")]
    MarginTotalMismatch { rows: u64, cols: u64 },

    #[error("space too large to enumerate: {0}")]
    SpaceTooLarge(String),

    #[error("the constrained space is empty")]
    EmptySpace,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: unknown {axis} label {label:?}")]
    UnknownLabel { line: u64, axis: Axis, label: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

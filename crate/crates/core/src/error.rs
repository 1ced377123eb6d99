use thiserror::Error;

use crate::qp::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| exceeds tolerance")]
    NotSymmetric { row: usize, col: usize },

    #[error("pivot {pivot:e} at position {index} is below the breakdown floor")]
    PivotBreakdown { index: usize, pivot: f64 },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("active set is full (capacity {capacity})")]
    CapacityExceeded { capacity: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("constraint {index} is already active")]
    AlreadyActive { index: usize },

    #[error("constraint {index} is linearly dependent on the active set (q = {q:e})")]
    DependentConstraint { index: usize, q: f64 },

    #[error("problem too large for exhaustive enumeration (n = {n}, p = {p}; limits n <= 6, p <= 16)")]
    SizeLimit { n: usize, p: usize },

    #[error("sample window [{k_a}, {k_b}] is invalid for a series of length {len}")]
    WindowOutOfRange { k_a: usize, k_b: usize, len: usize },

    #[error("enumeration oracle found no KKT point but a feasible vertex exists")]
    OracleInconsistent,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("solver returned {status:?}")]
    Solver { status: SolveStatus },

    #[error("closed loop halted at step {step}: solver returned {status:?}")]
    ClosedLoopHalted { step: usize, status: SolveStatus },
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

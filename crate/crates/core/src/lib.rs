//! Dense active-set QP solver with rank-one inverse updates, an integral-action
//! MPC condensing layer, and a closed-loop mass-chain benchmark.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod linalg;
pub mod qp;
pub mod qpfile;
pub mod mpc;
pub mod reference;

pub use error::{Error, Result};
pub use qp::{
    solve, DropRule, QpMatrices, QpProblem, QpSolution, SolveStatus, SolverOptions, SolverWorkspace,
};

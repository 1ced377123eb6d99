//! Dense inequality-constrained QP
//!
//! ```text
//!     minimize    1/2 θ' E θ + θ' F
//!     subject to  M θ <= γ
//! ```
//!
//! solved by a primal-dual active-set method that maintains the inverse of the
//! active block of the dual Hessian `H = M E^-1 M'` through rank-one additive and
//! subtractive updates. `E` is factorized once, and `H` is precomputed when the
//! problem matrices are built; only `F` and `γ` change between solves.

mod complexity;
mod solver;
mod workspace;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::linalg::{dual_hessian, factorize_spd, FactoredSpd};

pub use complexity::{memory_footprint, predicted_flops, predicted_flops_doubled, FootprintRow};
pub use solver::{solve, solve_with, NoObserver, SolveEvent, SolveObserver};
pub use workspace::SolverWorkspace;

/// Default tolerance on `q = h - h' H_A^-1 h` below which a constraint is
/// treated as linearly dependent on the active set.
pub const DEFAULT_EPS_Q: f64 = 1e-11;

/// The constant part of a QP: Hessian, its factors, constraint matrix, and dual
/// Hessian. Shared between solves that differ only in `F` and `γ`.
#[derive(Debug, Clone)]
pub struct QpMatrices {
    hessian: DMatrix<f64>,
    factor: FactoredSpd,
    constraints: DMatrix<f64>,
    constraints_t: DMatrix<f64>,
    dual_hessian: DMatrix<f64>,
    capacity: usize,
}

impl QpMatrices {
    /// Factorizes `hessian` and precomputes the dual Hessian. The active-set
    /// capacity defaults to `min(p, n + 1)`.
    pub fn new(hessian: DMatrix<f64>, constraints: DMatrix<f64>) -> Result<Self> {
        let factor = factorize_spd(&hessian)?;
        let dual_hessian = dual_hessian(&factor, &constraints)?;
        let (p, n) = constraints.shape();
        Ok(QpMatrices {
            constraints_t: constraints.transpose(),
            hessian,
            factor,
            constraints,
            dual_hessian,
            capacity: p.min(n + 1),
        })
    }

    /// Overrides the active-set capacity, clamped to `[min(p, n), p]`.
    pub fn with_capacity(mut self, capacity: usize) -> Self {
        let (p, n) = self.constraints.shape();
        self.capacity = capacity.clamp(p.min(n), p);
        self
    }

    pub fn n(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn p(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn factor(&self) -> &FactoredSpd {
        &self.factor
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    pub fn dual_hessian(&self) -> &DMatrix<f64> {
        &self.dual_hessian
    }

    /// Row `i` of `M` as a contiguous slice.
    pub(crate) fn constraint_row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.constraints_t.as_slice()[i * n..(i + 1) * n]
    }

    /// Column (equivalently row) `j` of `H` as a contiguous slice.
    pub(crate) fn dual_column(&self, j: usize) -> &[f64] {
        let p = self.p();
        &self.dual_hessian.as_slice()[j * p..(j + 1) * p]
    }
}

/// A QP instance: shared matrices plus the gradient `F` and bounds `γ`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    matrices: Arc<QpMatrices>,
    grad: DVector<f64>,
    gamma: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        grad: DVector<f64>,
        constraints: DMatrix<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self> {
        check_len("constraint matrix columns", hessian.nrows(), constraints.ncols())?;
        let matrices = Arc::new(QpMatrices::new(hessian, constraints)?);
        Self::from_parts(matrices, grad, gamma)
    }

    pub fn from_parts(
        matrices: Arc<QpMatrices>,
        grad: DVector<f64>,
        gamma: DVector<f64>,
    ) -> Result<Self> {
        check_len("gradient", matrices.n(), grad.len())?;
        check_len("constraint vector", matrices.p(), gamma.len())?;
        Ok(QpProblem {
            matrices,
            grad,
            gamma,
        })
    }

    pub fn n(&self) -> usize {
        self.matrices.n()
    }

    pub fn p(&self) -> usize {
        self.matrices.p()
    }

    pub fn matrices(&self) -> &Arc<QpMatrices> {
        &self.matrices
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        self.matrices.hessian()
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        self.matrices.constraints()
    }

    pub fn dual_hessian(&self) -> &DMatrix<f64> {
        self.matrices.dual_hessian()
    }

    pub fn grad(&self) -> &DVector<f64> {
        &self.grad
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
}

/// `θ0 = -E^-1 F`.
pub fn unconstrained_solution(prob: &QpProblem) -> DVector<f64> {
    let mut theta0 = -prob.grad();
    prob.matrices
        .factor()
        .solve_inplace(theta0.as_mut_slice())
        .expect("gradient length checked at construction");
    theta0
}

/// `K0 = γ - M θ0`; a negative entry marks a violated constraint.
pub fn initial_violation(prob: &QpProblem, theta0: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("initial_violation theta", prob.n(), theta0.len())?;
    Ok(prob.gamma() - prob.constraints() * theta0)
}

/// `1/2 θ' E θ + θ' F`.
pub fn objective_value(prob: &QpProblem, theta: &DVector<f64>) -> Result<f64> {
    check_len("objective_value theta", prob.n(), theta.len())?;
    Ok(0.5 * theta.dot(&(prob.hessian() * theta)) + theta.dot(prob.grad()))
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Linear-dependence threshold on `q`.
    pub eps_q: f64,
    /// Iteration cap; `None` means `3p`.
    pub max_iter: Option<usize>,
    /// Entries of the violation vector that belong to active constraints are
    /// zero in exact arithmetic. When set, they are pinned to zero after each
    /// update so that roundoff cannot make an active constraint look violated;
    /// when cleared, the raw values are used and such roundoff trips the
    /// repeated-index guard.
    pub pin_active_residual: bool,
    /// A violated constraint found linearly dependent on the active set is
    /// re-evaluated through its dependence identity `γ_j - y' γ_A` before any
    /// swap or infeasibility verdict, and skipped when that value is
    /// nonnegative. Without this, degenerate vertices (for example rate and
    /// amplitude limits that coincide after two moves) can swap the same pair
    /// of constraints indefinitely on roundoff-level violations.
    pub recheck_dependent: bool,
    /// Which active constraint leaves when a dependent constraint is swapped
    /// in, and which negative multiplier is removed after an add.
    pub drop_rule: DropRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DropRule {
    /// Swaps drop the largest dependence weight `y_r`; after an add the most
    /// negative multiplier is removed until none is negative. Cycles on a
    /// small fraction of degenerate-free random instances.
    LargestWeight,
    /// Drops whichever active multiplier reaches zero first as the entering
    /// multiplier grows from zero: `argmin λ_r / y_r` over `y_r > 0` on swaps,
    /// and after an add the first sign change along the segment from the
    /// multipliers before the add to the new ones. This is the dual step of
    /// Goldfarb and Idnani, carried out with the same inverse updates, and it
    /// terminates.
    #[default]
    BlockingStep,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps_q: DEFAULT_EPS_Q,
            max_iter: None,
            pin_active_residual: true,
            recheck_dependent: true,
            drop_rule: DropRule::default(),
        }
    }
}

impl SolverOptions {
    /// No iteration cap.
    pub fn unbounded() -> Self {
        SolverOptions {
            max_iter: Some(usize::MAX),
            ..Default::default()
        }
    }

    pub fn iteration_cap(&self, p: usize) -> usize {
        self.max_iter.unwrap_or(3 * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    CycleGuardTripped,
}

/// Active-set change counts used by the operation-count model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    /// Adds that required swapping out a linearly dependent active constraint.
    pub dependent_adds: usize,
    /// Plain adds of a linearly independent constraint.
    pub independent_adds: usize,
    /// Removals of constraints with a negative multiplier.
    pub removals: usize,
}

/// Evidence that the QP is infeasible: the violated constraint `violated` is a
/// combination of the active rows with weights `weights`, none positive.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub violated: usize,
    pub q: f64,
    pub weights: Vec<f64>,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub theta: DVector<f64>,
    /// Multipliers of the active constraints, in `active` order.
    pub lambda_active: Vec<f64>,
    /// Zero-based constraint indices, in the order they entered the active set.
    pub active: Vec<usize>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub events: EventCounts,
    pub certificate: Option<InfeasibilityCertificate>,
    /// Largest `|K_n|` over active `n` seen in the last violation update.
    pub active_residual: f64,
}

impl QpSolution {
    pub fn c_star(&self) -> usize {
        self.active.len()
    }

    /// Multipliers scattered to all `p` constraints.
    pub fn lambda_full(&self, p: usize) -> DVector<f64> {
        let mut lambda = DVector::zeros(p);
        for (&i, &l) in self.active.iter().zip(&self.lambda_active) {
            lambda[i] = l;
        }
        lambda
    }
}

//! Independent QP solvers used to cross-check the active-set solver.
//!
//! None of these share code with [`crate::qp::solve`] beyond the problem data:
//! Hildreth iterates on the dual directly, enumeration uses nalgebra's own
//! Cholesky factorizations, and [`goldfarb_idnani`] delegates to the `quadprog`
//! crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::qp::{EventCounts, QpProblem, QpSolution, SolveStatus};

/// Options for [`hildreth_solve`].
#[derive(Debug, Clone, Copy)]
pub struct HildrethOptions {
    /// Stop once a full sweep changes no multiplier by more than this.
    pub tol: f64,
    /// Maximum number of sweeps.
    pub max_iter: usize,
}

impl Default for HildrethOptions {
    fn default() -> Self {
        HildrethOptions {
            tol: 1e-7,
            max_iter: 38,
        }
    }
}

impl HildrethOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig(format!(
                "hildreth tolerance must be positive and sweep count at least 1 (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

fn spd_factor(e: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(e.clone()).ok_or(Error::NotPositiveDefinite("hessian"))
}

fn solution_from_full(
    prob: &QpProblem,
    theta: DVector<f64>,
    lambda: &DVector<f64>,
    iterations: usize,
    status: SolveStatus,
) -> QpSolution {
    let active: Vec<usize> = (0..prob.p()).filter(|&i| lambda[i] > 0.0).collect();
    QpSolution {
        theta,
        lambda_active: active.iter().map(|&i| lambda[i]).collect(),
        active,
        iterations,
        status,
        events: EventCounts::default(),
        certificate: None,
        active_residual: 0.0,
    }
}

/// Gauss-Seidel coordinate ascent on the dual with projection onto `λ >= 0`.
///
/// Returns status `IterationLimit` (with the last iterate) when the sweep cap
/// is hit first. Infeasible problems are not detected.
pub fn hildreth_solve(prob: &QpProblem, opts: &HildrethOptions) -> Result<QpSolution> {
    opts.validate()?;
    let chol = spd_factor(prob.hessian())?;
    let theta0 = -chol.solve(prob.grad());
    let k0 = prob.gamma() - prob.constraints() * &theta0;
    let h = prob.dual_hessian();
    let p = prob.p();

    let mut lambda: DVector<f64> = DVector::zeros(p);
    let mut sweeps = 0;
    let mut converged = p == 0;
    while !converged && sweeps < opts.max_iter {
        sweeps += 1;
        let mut change = 0.0f64;
        for i in 0..p {
            let hii = h[(i, i)];
            if hii <= 0.0 {
                continue;
            }
            let mut w = k0[i];
            for j in 0..p {
                if j != i {
                    w += h[(i, j)] * lambda[j];
                }
            }
            let new = (-w / hii).max(0.0);
            change = change.max((new - lambda[i]).abs());
            lambda[i] = new;
        }
        converged = change < opts.tol;
    }

    let correction: DVector<f64> = prob.constraints().transpose() * &lambda;
    let theta = &theta0 - chol.solve(&correction);
    let status = if converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterationLimit
    };
    Ok(solution_from_full(prob, theta, &lambda, sweeps, status))
}

/// Largest problem accepted by [`enumerate_active_sets`].
pub const ENUMERATION_MAX_N: usize = 6;
pub const ENUMERATION_MAX_P: usize = 16;

const ENUM_TOL: f64 = 1e-10;
// relative pivot floor for treating a selected row set as rank deficient
const RANK_TOL: f64 = 1e-10;

fn select(mask: u32, p: usize) -> Vec<usize> {
    (0..p).filter(|&i| mask & (1 << i) != 0).collect()
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

/// Cholesky of a Gram-type matrix, rejecting numerically singular ones.
fn full_rank_factor(g: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = g.diagonal().amax();
    if g.nrows() > 0 && !(scale > 0.0) {
        return None;
    }
    let chol = Cholesky::new(g)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    (l.nrows() == 0 || min_pivot > RANK_TOL * scale).then_some(chol)
}

fn feasible(prob: &QpProblem, theta: &DVector<f64>) -> bool {
    let tol = ENUM_TOL * (1.0 + prob.gamma().amax());
    let slack = prob.constraints() * theta - prob.gamma();
    slack.iter().all(|&s| s <= tol)
}

/// Whether `{θ : Mθ <= γ}` is nonempty. A nonempty polyhedron has a minimal
/// face `{M_S θ = γ_S}` with `S` a set of `rank(M)` independent rows, and its
/// least-norm point is feasible, so checking those points is exhaustive.
fn polyhedron_nonempty(prob: &QpProblem) -> bool {
    let m = prob.constraints();
    let p = prob.p();
    let rank = m.rank(1e-9 * m.amax().max(1.0));
    for mask in 0u32..(1u32 << p) {
        if mask.count_ones() as usize != rank {
            continue;
        }
        let idx = select(mask, p);
        let ms = rows(m, &idx);
        let Some(chol) = full_rank_factor(&ms * ms.transpose()) else {
            continue;
        };
        let gs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| prob.gamma()[i]));
        let theta = ms.transpose() * chol.solve(&gs);
        if feasible(prob, &theta) {
            return true;
        }
    }
    false
}

/// Exhaustive active-set enumeration for small problems.
///
/// Every subset of at most `n` rows with full row rank is solved as an
/// equality-constrained QP; candidates with nonnegative multipliers and a
/// feasible primal point are compared by objective. When no candidate exists
/// the problem is checked for feasibility independently; a feasible problem
/// with no KKT candidate yields [`Error::OracleInconsistent`].
pub fn enumerate_active_sets(prob: &QpProblem) -> Result<QpSolution> {
    let (n, p) = (prob.n(), prob.p());
    if n > ENUMERATION_MAX_N || p > ENUMERATION_MAX_P {
        return Err(Error::SizeLimit { n, p });
    }
    let e = prob.hessian();
    let chol = spd_factor(e)?;
    let theta0 = -chol.solve(prob.grad());
    let k0 = prob.gamma() - prob.constraints() * &theta0;
    let m = prob.constraints();
    let einv_mt = chol.solve(&m.transpose());

    let mut best: Option<(f64, Vec<usize>, DVector<f64>, DVector<f64>)> = None;
    let mut visited = 0;
    for mask in 0u32..(1u32 << p) {
        if mask.count_ones() as usize > n {
            continue;
        }
        visited += 1;
        let idx = select(mask, p);
        let ma = rows(m, &idx);
        let ea = DMatrix::from_fn(n, idx.len(), |r, c| einv_mt[(r, idx[c])]);
        let theta;
        let lambda;
        if idx.is_empty() {
            theta = theta0.clone();
            lambda = DVector::zeros(0);
        } else {
            let Some(ha) = full_rank_factor(&ma * &ea) else {
                continue;
            };
            let ka = DVector::from_iterator(idx.len(), idx.iter().map(|&i| k0[i]));
            lambda = -ha.solve(&ka);
            if lambda.iter().any(|&l| l < -ENUM_TOL) {
                continue;
            }
            theta = &theta0 - &ea * &lambda;
        }
        if !feasible(prob, &theta) {
            continue;
        }
        let obj = 0.5 * theta.dot(&(e * &theta)) + theta.dot(prob.grad());
        if best.as_ref().is_none_or(|(b, ..)| obj < *b) {
            best = Some((obj, idx, theta, lambda));
        }
    }

    match best {
        Some((_, active, theta, lambda)) => Ok(QpSolution {
            theta,
            lambda_active: lambda.iter().copied().collect(),
            active,
            iterations: visited,
            status: SolveStatus::Optimal,
            events: EventCounts::default(),
            certificate: None,
            active_residual: 0.0,
        }),
        None if polyhedron_nonempty(prob) => Err(Error::OracleInconsistent),
        None => Ok(QpSolution {
            theta: theta0,
            lambda_active: Vec::new(),
            active: Vec::new(),
            iterations: visited,
            status: SolveStatus::Infeasible,
            events: EventCounts::default(),
            certificate: None,
            active_residual: 0.0,
        }),
    }
}

/// Dual active-set solution by the Goldfarb-Idnani method (`quadprog` crate).
/// Usable at any size; serves as the reference for closed-loop comparisons
/// beyond the enumeration limits.
pub fn goldfarb_idnani(prob: &QpProblem) -> Result<QpSolution> {
    let n = prob.n();
    let p = prob.p();
    let mut qmat: Vec<f64> = prob.hessian().transpose().iter().copied().collect();
    let amat: Vec<f64> = prob.constraints().transpose().iter().copied().collect();
    let result = quadprog::solve_qp(
        &mut qmat,
        prob.grad().as_slice(),
        &amat,
        prob.gamma().as_slice(),
        0,
        false,
    );
    match result {
        Ok(sol) => {
            let lambda = DVector::from_vec(sol.lagr);
            let theta = DVector::from_vec(sol.sol);
            Ok(solution_from_full(
                prob,
                theta,
                &lambda,
                sol.iter,
                SolveStatus::Optimal,
            ))
        }
        Err(quadprog::Error::Infeasible) => Ok(QpSolution {
            theta: DVector::zeros(n),
            lambda_active: Vec::new(),
            active: Vec::new(),
            iterations: 0,
            status: SolveStatus::Infeasible,
            events: EventCounts::default(),
            certificate: None,
            active_residual: 0.0,
        }),
        Err(quadprog::Error::NotPositiveDefinite) => Err(Error::NotPositiveDefinite("hessian")),
        Err(_) => Err(Error::DimensionMismatch {
            context: "quadprog input",
            expected: n * p,
            found: amat.len(),
        }),
    }
}

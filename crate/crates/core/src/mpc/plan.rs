use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::qp::{solve, QpMatrices, QpProblem, QpSolution, SolverOptions, SolverWorkspace};

use super::model::DtAugModel;

/// `Φ` (rows `C A^i`, `i = 1..N`) and the block lower-triangular `Γ` with
/// blocks `C A^(i-j) B`.
pub fn build_prediction(
    aug: &DtAugModel,
    horizon: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let (nx, nu, ny) = (aug.n_states(), aug.n_inputs(), aug.n_outputs());
    let mut phi = DMatrix::zeros(horizon * ny, nx);
    let mut gamma = DMatrix::zeros(horizon * ny, horizon * nu);

    // markov[k] = C A^k B
    let mut markov = Vec::with_capacity(horizon);
    let mut ca = aug.c.clone();
    for i in 0..horizon {
        markov.push(&ca * &aug.b);
        ca = &ca * &aug.a;
        phi.view_mut((i * ny, 0), (ny, nx)).copy_from(&ca);
    }
    for i in 0..horizon {
        for j in 0..=i {
            gamma
                .view_mut((i * ny, j * nu), (ny, nu))
                .copy_from(&markov[i - j]);
        }
    }
    Ok((phi, gamma))
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), b.shape()).copy_from(*b);
        at += b.nrows();
    }
    out
}

fn require_pd(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    let sym = (m + m.transpose()) * 0.5;
    Cholesky::new(sym).map(|_| ()).ok_or(Error::NotPositiveDefinite(what))
}

/// Tracking and move weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrices {
    pub e: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

/// `Ω = diag(Q, .., Q, P)`, `Ψ = diag(R, .., R)`, `E = 2(Ψ + Γ'ΩΓ)`.
pub fn build_cost(gamma: &DMatrix<f64>, weights: &Weights, horizon: usize) -> Result<CostMatrices> {
    let ny = weights.q.nrows();
    let nu = weights.r.nrows();
    check_len("Q columns", ny, weights.q.ncols())?;
    check_len("P size", ny, weights.p.nrows())?;
    check_len("P columns", ny, weights.p.ncols())?;
    check_len("R columns", nu, weights.r.ncols())?;
    check_len("Γ rows", horizon * ny, gamma.nrows())?;
    check_len("Γ columns", horizon * nu, gamma.ncols())?;
    require_pd(&weights.q, "Q")?;
    require_pd(&weights.r, "R")?;
    require_pd(&(&weights.p - &weights.q), "P - Q")?;

    let mut ob: Vec<&DMatrix<f64>> = vec![&weights.q; horizon];
    ob[horizon - 1] = &weights.p;
    let omega = block_diag(&ob);
    let psi = block_diag(&vec![&weights.r; horizon]);
    let mut e = (&psi + gamma.transpose() * &omega * gamma) * 2.0;
    e = (&e + e.transpose()) * 0.5;
    Ok(CostMatrices { e, omega, psi })
}

/// Elementwise box limits on input increments, inputs, and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    pub du_min: DVector<f64>,
    pub du_max: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub y_min: DVector<f64>,
    pub y_max: DVector<f64>,
}

impl Limits {
    /// Symmetric boxes `|Δu| <= du`, `|u| <= u`, `|y| <= y` on every channel.
    pub fn symmetric(n_u: usize, n_y: usize, du: f64, u: f64, y: f64) -> Self {
        Limits {
            du_min: DVector::from_element(n_u, -du),
            du_max: DVector::from_element(n_u, du),
            u_min: DVector::from_element(n_u, -u),
            u_max: DVector::from_element(n_u, u),
            y_min: DVector::from_element(n_y, -y),
            y_max: DVector::from_element(n_y, y),
        }
    }

    fn validate(&self, n_u: usize, n_y: usize) -> Result<()> {
        let pairs = [
            ("Δu", &self.du_min, &self.du_max, n_u),
            ("u", &self.u_min, &self.u_max, n_u),
            ("y", &self.y_min, &self.y_max, n_y),
        ];
        for (name, lo, hi, len) in pairs {
            check_len("limit vector", len, lo.len())?;
            check_len("limit vector", len, hi.len())?;
            if lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} limits must satisfy min < max elementwise"
                )));
            }
        }
        Ok(())
    }
}

/// `𝓛 ΔU <= d + W x(k) + V u(k-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStack {
    pub l: DMatrix<f64>,
    pub d: DVector<f64>,
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// Constraint row count for horizon `N`.
pub fn constraint_rows(horizon: usize, n_u: usize, n_y: usize) -> usize {
    2 * (horizon + 1) * n_y + 4 * horizon * n_u
}

/// Stacks, for stages `i = 0..N-1`, the rows `Δu_min <= Δu_i <= Δu_max` and
/// `y_min <= y_i <= y_max`, then the terminal output box at stage `N`, followed
/// by the input boxes on `u_i = u(k-1) + Δu_0 + .. + Δu_i`.
pub fn build_constraints(
    aug: &DtAugModel,
    phi: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    horizon: usize,
    limits: &Limits,
) -> Result<ConstraintStack> {
    let (nx, nu, ny) = (aug.n_states(), aug.n_inputs(), aug.n_outputs());
    limits.validate(nu, ny)?;
    check_len("Φ rows", horizon * ny, phi.nrows())?;
    check_len("Φ columns", nx, phi.ncols())?;
    check_len("Γ rows", horizon * ny, gamma.nrows())?;
    check_len("Γ columns", horizon * nu, gamma.ncols())?;

    let stage = 2 * nu + 2 * ny;
    let out_rows = horizon * stage + 2 * ny;
    let p = out_rows + 2 * horizon * nu;
    let mut l = DMatrix::zeros(p, horizon * nu);
    let mut d = DVector::zeros(p);
    let mut w = DMatrix::zeros(p, nx);
    let mut v = DMatrix::zeros(p, nu);

    // Output block rows read y_i; stage 0 uses the measured output C x(k),
    // later stages the prediction Φ x(k) + Γ ΔU.
    let mut put_output_rows = |row: usize, stage_idx: usize| {
        for s in 0..ny {
            let (lo, hi) = (row + s, row + ny + s);
            d[lo] = -limits.y_min[s];
            d[hi] = limits.y_max[s];
            if stage_idx == 0 {
                for c in 0..nx {
                    w[(lo, c)] = aug.c[(s, c)];
                    w[(hi, c)] = -aug.c[(s, c)];
                }
            } else {
                let pr = (stage_idx - 1) * ny + s;
                for c in 0..horizon * nu {
                    l[(lo, c)] = -gamma[(pr, c)];
                    l[(hi, c)] = gamma[(pr, c)];
                }
                for c in 0..nx {
                    w[(lo, c)] = phi[(pr, c)];
                    w[(hi, c)] = -phi[(pr, c)];
                }
            }
        }
    };
    for i in 0..horizon {
        put_output_rows(i * stage + 2 * nu, i);
    }
    put_output_rows(horizon * stage, horizon);

    for i in 0..horizon {
        let row = i * stage;
        for s in 0..nu {
            l[(row + s, i * nu + s)] = -1.0;
            d[row + s] = -limits.du_min[s];
            l[(row + nu + s, i * nu + s)] = 1.0;
            d[row + nu + s] = limits.du_max[s];
        }
    }

    for i in 0..horizon {
        for s in 0..nu {
            let lo = out_rows + i * nu + s;
            let hi = out_rows + horizon * nu + i * nu + s;
            for j in 0..=i {
                l[(lo, j * nu + s)] = -1.0;
                l[(hi, j * nu + s)] = 1.0;
            }
            d[lo] = -limits.u_min[s];
            d[hi] = limits.u_max[s];
            v[(lo, s)] = 1.0;
            v[(hi, s)] = -1.0;
        }
    }
    Ok(ConstraintStack { l, d, w, v })
}

/// Everything computed offline for one controller.
#[derive(Debug, Clone)]
pub struct MpcPlan {
    pub horizon: usize,
    pub model: DtAugModel,
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub cost: CostMatrices,
    /// `F = fx x(k) - fr ℛ_k` with `fx = 2Γ'ΩΦ`, `fr = 2Γ'Ω`.
    pub fx: DMatrix<f64>,
    pub fr: DMatrix<f64>,
    pub constraints: ConstraintStack,
    pub matrices: Arc<QpMatrices>,
}

impl MpcPlan {
    pub fn build(
        model: &DtAugModel,
        horizon: usize,
        weights: &Weights,
        limits: &Limits,
    ) -> Result<Self> {
        check_len("Q size", model.n_outputs(), weights.q.nrows())?;
        check_len("R size", model.n_inputs(), weights.r.nrows())?;
        let (phi, gamma) = build_prediction(model, horizon)?;
        let cost = build_cost(&gamma, weights, horizon)?;
        let constraints = build_constraints(model, &phi, &gamma, horizon, limits)?;
        let fr = gamma.transpose() * &cost.omega * 2.0;
        let fx = &fr * &phi;
        let p = constraints.l.nrows();
        let matrices = QpMatrices::new(cost.e.clone(), constraints.l.clone())
            .map_err(|e| match e {
                Error::PivotBreakdown { .. } => Error::NotPositiveDefinite("E"),
                other => other,
            })?
            .with_capacity(p / 2);
        Ok(MpcPlan {
            horizon,
            model: model.clone(),
            phi,
            gamma,
            cost,
            fx,
            fr,
            constraints,
            matrices: Arc::new(matrices),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.model.n_inputs()
    }

    pub fn n_outputs(&self) -> usize {
        self.model.n_outputs()
    }

    pub fn p(&self) -> usize {
        self.constraints.l.nrows()
    }

    pub fn workspace(&self) -> SolverWorkspace {
        SolverWorkspace::new(self.matrices.n(), self.p(), self.matrices.capacity())
    }

    /// QP for the current augmented state, reference preview and last input.
    pub fn assemble_qp(
        &self,
        x_k: &DVector<f64>,
        r_future: &DVector<f64>,
        u_prev: &DVector<f64>,
    ) -> Result<QpProblem> {
        check_len("augmented state", self.model.n_states(), x_k.len())?;
        check_len("reference preview", self.horizon * self.n_outputs(), r_future.len())?;
        check_len("previous input", self.n_inputs(), u_prev.len())?;
        let grad = &self.fx * x_k - &self.fr * r_future;
        let cs = &self.constraints;
        let gamma = &cs.d + &cs.w * x_k + &cs.v * u_prev;
        QpProblem::from_parts(self.matrices.clone(), grad, gamma)
    }
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: DVector<f64>,
    pub du: DVector<f64>,
    pub problem: QpProblem,
    pub solution: QpSolution,
}

/// Solves the step QP and applies the first move. A non-optimal solver status
/// is passed through in `solution.status`; `u` is then computed from whatever
/// iterate the solver returned.
pub fn receding_horizon_step(
    plan: &MpcPlan,
    x_k: &DVector<f64>,
    r_future: &DVector<f64>,
    u_prev: &DVector<f64>,
    opts: &SolverOptions,
    ws: &mut SolverWorkspace,
) -> Result<StepOutcome> {
    let problem = plan.assemble_qp(x_k, r_future, u_prev)?;
    let solution = solve(&problem, opts, ws)?;
    let du = solution.theta.rows(0, plan.n_inputs()).into_owned();
    Ok(StepOutcome {
        u: u_prev + &du,
        du,
        problem,
        solution,
    })
}

//! Random instance generators and instrumentation shared by integration tests.
#![allow(dead_code)]

use imuqp::qp::{objective_value, QpProblem, SolveEvent, SolveObserver, SolverWorkspace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-scale..=scale))
}

/// Well-conditioned random SPD matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = uniform_matrix(rng, n, n, 1.0);
    let e = a.transpose() * &a + DMatrix::identity(n, n) * 0.5;
    (&e + e.transpose()) * 0.5
}

/// Random orthogonal matrix from the QR factorization of a random matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    uniform_matrix(rng, n, n, 1.0).qr().q()
}

/// Random QP that is feasible by construction: `γ = Mθ_f + s` with every
/// slack `s_i` in `[0.05, 1)`, so no constraint is tight at `θ_f` and the
/// instance is generic.
pub fn random_feasible_qp(rng: &mut ChaCha8Rng, n: usize, p: usize) -> QpProblem {
    let e = random_spd(rng, n);
    let f = uniform_vector(rng, n, 5.0);
    let m = uniform_matrix(rng, p, n, 1.0);
    let theta_f = uniform_vector(rng, n, 1.0);
    let slack = DVector::from_fn(p, |_, _| rng.random_range(0.05..1.0));
    let gamma = &m * &theta_f + slack;
    QpProblem::new(e, f, m, gamma).expect("generated problem is valid")
}

/// Feasible QP with deliberate degeneracy: about 30% of the constraints pass
/// exactly through `θ_f`, and sometimes one row is a positively scaled copy of
/// another.
pub fn random_degenerate_qp(rng: &mut ChaCha8Rng, n: usize, p: usize) -> QpProblem {
    let e = random_spd(rng, n);
    let f = uniform_vector(rng, n, 5.0);
    let mut m = uniform_matrix(rng, p, n, 1.0);
    let theta_f = uniform_vector(rng, n, 1.0);
    let mut gamma = &m * &theta_f;
    for i in 0..p {
        if rng.random_bool(0.7) {
            gamma[i] += rng.random_range(0.0..1.0);
        }
    }
    if p >= 2 && rng.random_bool(0.3) {
        let (src, dst) = (rng.random_range(0..p), rng.random_range(0..p));
        if src != dst {
            let scale = rng.random_range(0.5..2.0);
            let row = m.row(src) * scale;
            m.set_row(dst, &row);
            gamma[dst] = gamma[src] * scale;
            // keep θ_f feasible for the copied row
            let needed = (m.row(dst) * &theta_f)[0];
            if gamma[dst] < needed {
                gamma[dst] = needed;
            }
        }
    }
    QpProblem::new(e, f, m, gamma).expect("generated problem is valid")
}

/// Three constraints whose feasible sets cannot intersect:
/// `-a1 φ1 + φ2 <= 0`, `a2 φ1 + φ2 <= 0`, `-φ2 <= -ε` in a rotated and shifted
/// frame `θ = R φ + c`, padded with free coordinates when `n > 2`.
pub fn random_infeasible_qp(rng: &mut ChaCha8Rng, n: usize) -> QpProblem {
    assert!(n >= 2);
    let a1 = rng.random_range(0.1..5.0);
    let a2 = rng.random_range(0.1..5.0);
    let eps = rng.random_range(0.01..2.0);
    let mut base = DMatrix::zeros(3, n);
    base[(0, 0)] = -a1;
    base[(0, 1)] = 1.0;
    base[(1, 0)] = a2;
    base[(1, 1)] = 1.0;
    base[(2, 1)] = -1.0;
    let gamma_base = DVector::from_vec(vec![0.0, 0.0, -eps]);
    // rows in θ coordinates: m_i R' since φ = R'(θ - c)
    let r = random_rotation(rng, n);
    let c = uniform_vector(rng, n, 2.0);
    let m = &base * r.transpose();
    let gamma = gamma_base + &m * &c;
    let e = random_spd(rng, n);
    let f = uniform_vector(rng, n, 5.0);
    QpProblem::new(e, f, m, gamma).expect("generated problem is valid")
}

/// Explicit inverse of `M_A E^-1 M_A'`.
pub fn explicit_active_inverse(prob: &QpProblem, active: &[usize]) -> DMatrix<f64> {
    let m = prob.constraints();
    let ma = DMatrix::from_fn(active.len(), m.ncols(), |r, c| m[(active[r], c)]);
    let einv = prob.hessian().clone().try_inverse().expect("E invertible");
    (&ma * einv * ma.transpose())
        .try_inverse()
        .expect("active rows independent")
}

/// Records invariant violations seen during a solve.
#[derive(Debug, Default)]
pub struct InvariantProbe {
    pub last_objective: Option<f64>,
    pub failures: Vec<String>,
    pub adds: usize,
    pub removals: usize,
    pub swaps: usize,
}

impl InvariantProbe {
    pub fn new(prob: &QpProblem) -> Self {
        let theta0 = imuqp::qp::unconstrained_solution(prob);
        InvariantProbe {
            last_objective: Some(objective_value(prob, &theta0).unwrap()),
            ..Default::default()
        }
    }
}

const MONOTONE_SLACK: f64 = 1e-10;

impl SolveObserver for InvariantProbe {
    fn on_event(&mut self, event: SolveEvent, ws: &SolverWorkspace, prob: &QpProblem) {
        let theta = ws.iterate(prob).unwrap();
        let j = objective_value(prob, &theta).unwrap();
        let prev = self.last_objective.replace(j).unwrap();
        let slack = MONOTONE_SLACK * (1.0 + prev.abs());
        match event {
            SolveEvent::Added { index, swapped_out } => {
                let last = *ws.lambda().last().unwrap();
                if !(last > 0.0) {
                    self.failures.push(format!("multiplier of added {index} is {last}"));
                }
                if swapped_out.is_some() {
                    self.swaps += 1;
                } else {
                    self.adds += 1;
                    if !(j > prev - slack) {
                        self.failures
                            .push(format!("objective fell across add of {index}: {prev} -> {j}"));
                    }
                }
            }
            SolveEvent::Removed { index } => {
                self.removals += 1;
                if !(j < prev + slack) {
                    self.failures
                        .push(format!("objective rose across removal of {index}: {prev} -> {j}"));
                }
            }
            SolveEvent::ViolationUpdated => {
                let tol = 1e-7 * (1.0 + prob.gamma().amax());
                let m = prob.constraints();
                for &a in ws.active() {
                    let k = prob.gamma()[a] - (m.row(a) * &theta)[0];
                    if k.abs() > tol {
                        self.failures.push(format!("active residual {k} at {a}"));
                    }
                }
            }
        }
    }
}

/// Whether adding row `j` keeps `M_A E^-1 M_A'` well conditioned (2-norm
/// condition number at most 1e4). Sequences skip other adds: for
/// near-dependent rows the explicit inverse is itself inaccurate.
pub fn well_conditioned(prob: &QpProblem, active: &[usize], j: usize) -> bool {
    let mut rows = active.to_vec();
    rows.push(j);
    let m = prob.constraints();
    let ma = DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)]);
    let h = &ma * prob.hessian().clone().try_inverse().unwrap() * ma.transpose();
    let sv = h.singular_values();
    sv.min() > 0.0 && sv.max() / sv.min() <= 1e4
}

/// One random sequence of up to 8 adds and removals on a fresh workspace,
/// sometimes re-adding the row just removed. After every step the maintained
/// inverse must match the explicit one within 1e-8 in max-norm. Returns the
/// number of comparisons made.
pub fn inverse_update_sequence(r: &mut ChaCha8Rng) -> Result<usize, String> {
    let n = r.random_range(2..=6);
    let p = r.random_range(4..=16);
    let prob = random_feasible_qp(r, n, p);
    let mut ws = SolverWorkspace::for_problem(&prob);
    ws.reset(&prob).map_err(|e| e.to_string())?;
    let mut last_removed = None;
    let mut compared = 0;
    for _ in 0..r.random_range(1..=8) {
        if ws.c() > 0 && r.random_bool(0.35) {
            let pos = r.random_range(0..ws.c());
            last_removed = Some(ws.active()[pos]);
            ws.simu(pos).map_err(|e| e.to_string())?;
        } else {
            let j = match last_removed.take() {
                Some(j) if r.random_bool(0.5) => j,
                _ => r.random_range(0..p),
            };
            if ws.is_active(j) || ws.c() == ws.capacity() || !well_conditioned(&prob, ws.active(), j) {
                continue;
            }
            ws.aimu(&prob, j).map_err(|e| format!("add {j}: {e}"))?;
        }
        if ws.c() == 0 {
            continue;
        }
        let explicit = explicit_active_inverse(&prob, ws.active());
        let diff = (ws.active_inverse() - explicit).amax();
        if !(diff <= 1e-8) {
            return Err(format!("active set {:?}: max-norm deviation {diff}", ws.active()));
        }
        compared += 1;
    }
    Ok(compared)
}

pub mod mpc;

//! Chain-of-masses closed-loop benchmark.

mod accuracy;
mod config;
mod csv;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::mpc::{augment, discretize_zoh, CtModel, DiscreteModel, Limits, MpcPlan, Weights};
use crate::qp::{solve, EventCounts, SolveStatus, SolverOptions};
use crate::reference::{enumerate_active_sets, goldfarb_idnani};

pub use accuracy::{accuracy_measures, aggregate, AccuracyReport, RunAggregate};
pub use config::{BenchConfig, CheckSolver, ReferenceSpec};
pub use csv::{write_csv, CSV_SCHEMA_VERSION};

/// `n` unit masses joined by unit springs, with walls at both ends and a
/// force input on every mass. State `[ρ; ρ̇]`, output `ρ`.
pub fn build_mass_chain(n: usize) -> Result<CtModel> {
    if n == 0 {
        return Err(Error::InvalidConfig("mass chain needs at least one mass".into()));
    }
    let coupling = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0,
        1 => 1.0,
        _ => 0.0,
    });
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&coupling);
    let mut b = DMatrix::zeros(2 * n, n);
    b.view_mut((n, 0), (n, n)).fill_with_identity();
    let mut c = DMatrix::zeros(n, 2 * n);
    c.view_mut((0, 0), (n, n)).fill_with_identity();
    CtModel::new(a, b, DVector::zeros(2 * n), c)
}

/// One plant update. Returns the next state and the output of the current one.
pub fn plant_step(
    dt: &DiscreteModel,
    x_p: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("plant state", dt.n_states(), x_p.len())?;
    check_len("plant input", dt.n_inputs(), u.len())?;
    let y = &dt.c_d * x_p;
    let next = &dt.a_d * x_p + &dt.b_d * u + &dt.w_d;
    Ok((next, y))
}

/// Log entry for one closed-loop sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub k: usize,
    pub t: f64,
    pub y: DVector<f64>,
    pub r: DVector<f64>,
    pub u: DVector<f64>,
    pub du: DVector<f64>,
    pub solve_ns: u64,
    pub m_star: usize,
    pub c_star: usize,
    pub events: EventCounts,
    pub accuracy: AccuracyReport,
}

/// Controller and plant built from a [`BenchConfig`].
#[derive(Debug, Clone)]
pub struct BenchSetup {
    pub config: BenchConfig,
    pub plant: DiscreteModel,
    pub plan: MpcPlan,
}

impl BenchSetup {
    pub fn new(config: &BenchConfig) -> Result<Self> {
        config.validate()?;
        let ct = build_mass_chain(config.masses)?;
        let plant = discretize_zoh(&ct, config.ts)?;
        let aug = augment(&plant)?;
        let (nu, ny) = (plant.n_inputs(), plant.n_outputs());
        let q = DMatrix::identity(ny, ny) * config.q_weight;
        let weights = Weights {
            p: &q * config.terminal_factor,
            q,
            r: DMatrix::identity(nu, nu) * config.r_weight,
        };
        let limits = Limits::symmetric(nu, ny, config.du_limit, config.u_limit, config.y_limit);
        let plan = MpcPlan::build(&aug, config.horizon, &weights, &limits)?;
        Ok(BenchSetup {
            config: config.clone(),
            plant,
            plan,
        })
    }

    fn reference(&self, t: f64) -> DVector<f64> {
        let ny = self.plant.n_outputs();
        DVector::from_fn(ny, |i, _| self.config.reference.value(i, ny, t))
    }

    /// `ℛ_k`: the reference at `t_k + i T_s`, `i = 1..N`, or the current value
    /// held when preview is off.
    fn preview(&self, k: usize) -> DVector<f64> {
        let ny = self.plant.n_outputs();
        let n = self.config.horizon;
        let ts = self.config.ts;
        let mut r = DVector::zeros(n * ny);
        for i in 1..=n {
            let t = if self.config.preview {
                (k + i) as f64 * ts
            } else {
                k as f64 * ts
            };
            r.rows_mut((i - 1) * ny, ny).copy_from(&self.reference(t));
        }
        r
    }

    fn initial_state(&self) -> DVector<f64> {
        let n = self.config.masses;
        let mut x = DVector::zeros(2 * n);
        let spread = self.config.initial_spread;
        if spread > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
            for i in 0..n {
                x[i] = rng.random_range(-spread..=spread);
            }
        }
        x
    }

    fn check_steps(&self) -> Vec<bool> {
        let steps = self.config.steps;
        match self.config.check_solver {
            None => vec![false; steps],
            Some(_) => match self.config.check_samples {
                None => vec![true; steps],
                Some(count) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5eed_c4ec);
                    let mut mask = vec![false; steps];
                    for i in rand::seq::index::sample(&mut rng, steps, count.min(steps)) {
                        mask[i] = true;
                    }
                    mask
                }
            },
        }
    }

    /// Runs the closed loop. Stops with [`Error::ClosedLoopHalted`] at the
    /// first solve that does not return `Optimal`.
    pub fn run(&self) -> Result<Vec<SimRecord>> {
        let cfg = &self.config;
        let opts = SolverOptions {
            eps_q: cfg.eps_q,
            max_iter: Some(cfg.max_iter.unwrap_or(usize::MAX)),
            ..Default::default()
        };
        let aug = &self.plan.model;
        let nu = self.plant.n_inputs();
        let checks = self.check_steps();
        let mut ws = self.plan.workspace();
        let mut x_p = self.initial_state();
        let mut x_p_prev = x_p.clone();
        let mut u_prev = DVector::zeros(nu);
        let mut records = Vec::with_capacity(cfg.steps);

        for k in 0..cfg.steps {
            let t = k as f64 * cfg.ts;
            let x = aug.state(&x_p, &x_p_prev)?;
            let prob = self.plan.assemble_qp(&x, &self.preview(k), &u_prev)?;

            let start = Instant::now();
            let sol = solve(&prob, &opts, &mut ws)?;
            let solve_ns = u64::try_from(start.elapsed().as_nanos()).unwrap_or(u64::MAX);

            if sol.status != SolveStatus::Optimal {
                return Err(Error::ClosedLoopHalted {
                    step: k,
                    status: sol.status,
                });
            }
            let theta_ref = match (checks[k], cfg.check_solver) {
                (true, Some(CheckSolver::GoldfarbIdnani)) => Some(goldfarb_idnani(&prob)?),
                (true, Some(CheckSolver::Enumeration)) => Some(enumerate_active_sets(&prob)?),
                _ => None,
            };
            if let Some(r) = &theta_ref {
                if r.status != SolveStatus::Optimal {
                    return Err(Error::Solver { status: r.status });
                }
            }
            let accuracy = accuracy_measures(&prob, &sol, theta_ref.as_ref().map(|r| &r.theta));

            let du = sol.theta.rows(0, nu).into_owned();
            let u = &u_prev + &du;
            let (next, y) = plant_step(&self.plant, &x_p, &u)?;
            records.push(SimRecord {
                k,
                t,
                y,
                r: self.reference(t),
                u: u.clone(),
                du,
                solve_ns,
                m_star: sol.iterations,
                c_star: sol.c_star(),
                events: sol.events,
                accuracy,
            });
            x_p_prev = std::mem::replace(&mut x_p, next);
            u_prev = u;
        }
        Ok(records)
    }
}

pub fn run_closed_loop(config: &BenchConfig) -> Result<Vec<SimRecord>> {
    BenchSetup::new(config)?.run()
}

/// Window statistics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub k_a: usize,
    pub k_b: usize,
    pub solve_ns: RunAggregate,
    pub total_solve_ns: u128,
    pub avg_c_star: f64,
    pub avg_m_star: f64,
    pub stationarity: RunAggregate,
    pub primal_feasibility: RunAggregate,
    pub dual_feasibility: RunAggregate,
    pub complementary_slackness: RunAggregate,
}

pub fn summarize(records: &[SimRecord], k_a: usize, k_b: usize) -> Result<RunSummary> {
    let col = |f: &dyn Fn(&SimRecord) -> f64| -> Result<RunAggregate> {
        let v: Vec<f64> = records.iter().map(f).collect();
        aggregate(&v, k_a, k_b)
    };
    let solve_ns = col(&|r| r.solve_ns as f64)?;
    let window = &records[k_a - 1..k_b];
    Ok(RunSummary {
        k_a,
        k_b,
        solve_ns,
        total_solve_ns: window.iter().map(|r| u128::from(r.solve_ns)).sum(),
        avg_c_star: col(&|r| r.c_star as f64)?.avg,
        avg_m_star: col(&|r| r.m_star as f64)?.avg,
        stationarity: col(&|r| r.accuracy.stationarity)?,
        primal_feasibility: col(&|r| r.accuracy.primal_feasibility)?,
        dual_feasibility: col(&|r| r.accuracy.dual_feasibility)?,
        complementary_slackness: col(&|r| r.accuracy.complementary_slackness)?,
    })
}

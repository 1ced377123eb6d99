//! Rollout oracles for the condensed MPC problem.

use imuqp::bench::{plant_step, BenchConfig, BenchSetup};
use imuqp::mpc::{augment, Limits, MpcPlan, Weights};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rng, uniform_vector};

/// Two-mass benchmark setup at horizon `n` with the default weights and limits.
pub fn two_mass_setup(horizon: usize) -> BenchSetup {
    let cfg = BenchConfig {
        masses: 2,
        horizon,
        ..BenchConfig::default()
    };
    BenchSetup::new(&cfg).unwrap()
}

/// Diagonal weights as the benchmark builds them.
pub fn bench_weights(cfg: &BenchConfig, n_u: usize, n_y: usize) -> Weights {
    let q = DMatrix::identity(n_y, n_y) * cfg.q_weight;
    Weights {
        p: &q * cfg.terminal_factor,
        q,
        r: DMatrix::identity(n_u, n_u) * cfg.r_weight,
    }
}

/// Same controller as [`two_mass_setup`] with caller-chosen limits.
pub fn two_mass_plan_with_limits(horizon: usize, limits: &Limits) -> MpcPlan {
    let setup = two_mass_setup(horizon);
    let aug = augment(&setup.plant).unwrap();
    MpcPlan::build(&aug, horizon, &bench_weights(&setup.config, 2, 2), limits).unwrap()
}

/// Plant-level rollout from `x_p(k)` with inputs `u(k-1) + Δu_0 + .. + Δu_i`.
/// Returns outputs `y_0..y_N` and inputs `u_0..u_{N-1}`.
pub struct Rollout {
    pub y: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
}

pub fn rollout(plan: &MpcPlan, x_p: &DVector<f64>, u_prev: &DVector<f64>, du: &DVector<f64>) -> Rollout {
    let plant = &plan.model.plant;
    let nu = plan.n_inputs();
    let mut x = x_p.clone();
    let mut u = u_prev.clone();
    let mut ys = Vec::new();
    let mut us = Vec::new();
    for i in 0..plan.horizon {
        u += du.rows(i * nu, nu);
        let (next, y) = plant_step(plant, &x, &u).unwrap();
        ys.push(y);
        us.push(u.clone());
        x = next;
    }
    ys.push(&plant.c_d * &x);
    Rollout { y: ys, u: us }
}

/// Random consistent pair `(x_p(k-1), x_p(k))` and the input `u(k-1)` that
/// links them.
pub fn random_plant_history(
    rng: &mut ChaCha8Rng,
    plan: &MpcPlan,
    scale: f64,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let plant = &plan.model.plant;
    let x_prev = uniform_vector(rng, plant.n_states(), scale);
    let u_prev = uniform_vector(rng, plant.n_inputs(), scale);
    let (x_p, _) = plant_step(plant, &x_prev, &u_prev).unwrap();
    (x_prev, x_p, u_prev)
}

/// Tracking cost evaluated on a rollout: stage weights on `y_1..y_{N-1}`,
/// terminal weight on `y_N`, move weights on every `Δu_i`.
pub fn rollout_cost(
    plan: &MpcPlan,
    weights: &Weights,
    x_p: &DVector<f64>,
    u_prev: &DVector<f64>,
    du: &DVector<f64>,
    r_future: &DVector<f64>,
) -> f64 {
    let ro = rollout(plan, x_p, u_prev, du);
    let (nu, ny, n) = (plan.n_inputs(), plan.n_outputs(), plan.horizon);
    let mut j = 0.0;
    for i in 1..=n {
        let e = &ro.y[i] - r_future.rows((i - 1) * ny, ny);
        let w = if i == n { &weights.p } else { &weights.q };
        j += e.dot(&(w * &e));
    }
    for i in 0..n {
        let d = du.rows(i * nu, nu);
        j += d.dot(&(&weights.r * d));
    }
    j
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

/// `Φ x(k) + Γ ΔU` against a plant rollout, relative tolerance 1e-9.
pub fn check_prediction(horizon: usize, seed: u64) -> Result<(), String> {
    let plan = two_mass_setup(horizon).plan;
    let mut r = rng(seed);
    let ny = plan.n_outputs();
    for trial in 0..20 {
        let (x_prev, x_p, u_prev) = random_plant_history(&mut r, &plan, 1.0);
        let x = plan.model.state(&x_p, &x_prev).unwrap();
        let du = uniform_vector(&mut r, horizon * plan.n_inputs(), 0.5);
        let predicted = &plan.phi * &x + &plan.gamma * &du;
        let ro = rollout(&plan, &x_p, &u_prev, &du);
        for i in 1..=horizon {
            for s in 0..ny {
                let (a, b) = (predicted[(i - 1) * ny + s], ro.y[i][s]);
                if !close(a, b, 1e-9) {
                    return Err(format!("N={horizon} trial {trial}: y_{i}[{s}] {a} vs rollout {b}"));
                }
            }
        }
    }
    Ok(())
}

/// `Lθ - γ` in the documented row order, built from a rollout.
fn per_step_residuals(
    plan: &MpcPlan,
    limits: &Limits,
    x_p: &DVector<f64>,
    u_prev: &DVector<f64>,
    du: &DVector<f64>,
) -> Vec<f64> {
    let ro = rollout(plan, x_p, u_prev, du);
    let (nu, ny, n) = (plan.n_inputs(), plan.n_outputs(), plan.horizon);
    let mut out = Vec::new();
    let outputs = |out: &mut Vec<f64>, y: &DVector<f64>| {
        out.extend((0..ny).map(|s| limits.y_min[s] - y[s]));
        out.extend((0..ny).map(|s| y[s] - limits.y_max[s]));
    };
    for i in 0..n {
        let d = du.rows(i * nu, nu);
        out.extend((0..nu).map(|s| limits.du_min[s] - d[s]));
        out.extend((0..nu).map(|s| d[s] - limits.du_max[s]));
        outputs(&mut out, &ro.y[i]);
    }
    outputs(&mut out, &ro.y[n]);
    for i in 0..n {
        out.extend((0..nu).map(|s| limits.u_min[s] - ro.u[i][s]));
    }
    for i in 0..n {
        out.extend((0..nu).map(|s| ro.u[i][s] - limits.u_max[s]));
    }
    out
}

/// Tight limits so that random points land on both sides of the boundary.
pub fn tight_limits() -> Limits {
    Limits::symmetric(2, 2, 0.05, 0.3, 0.4)
}

/// Row-by-row agreement of the constraint stack with per-step checks on a
/// rollout, then agreement of the feasibility verdict on points straddling
/// the boundary.
pub fn check_constraint_stack(horizon: usize, seed: u64) -> Result<(), String> {
    let limits = tight_limits();
    let plan = two_mass_plan_with_limits(horizon, &limits);
    let cs = &plan.constraints;
    let mut r = rng(seed);
    let (mut feasible, mut infeasible) = (0, 0);
    for trial in 0..200 {
        let (x_prev, x_p, u_prev) = random_plant_history(&mut r, &plan, 0.1);
        let x = plan.model.state(&x_p, &x_prev).unwrap();
        let spread = r.random_range(0.0..0.1);
        let du = uniform_vector(&mut r, horizon * plan.n_inputs(), spread);
        let stack: Vec<f64> = (&cs.l * &du - (&cs.d + &cs.w * &x + &cs.v * &u_prev))
            .iter()
            .copied()
            .collect();
        let direct = per_step_residuals(&plan, &limits, &x_p, &u_prev, &du);
        if stack.len() != direct.len() {
            return Err(format!("{} stacked rows, {} per-step checks", stack.len(), direct.len()));
        }
        for (row, (a, b)) in stack.iter().zip(&direct).enumerate() {
            if !close(*a, *b, 1e-9) {
                return Err(format!("N={horizon} trial {trial} row {row}: {a} vs {b}"));
            }
        }
        let worst = direct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst.abs() < 1e-9 {
            continue;
        }
        let stack_ok = stack.iter().all(|&v| v <= 0.0);
        if stack_ok != (worst <= 0.0) {
            return Err(format!("N={horizon} trial {trial}: verdicts differ"));
        }
        if stack_ok {
            feasible += 1;
        } else {
            infeasible += 1;
        }
    }
    if feasible == 0 || infeasible == 0 {
        return Err(format!(
            "N={horizon}: sample did not straddle the boundary ({feasible} feasible, {infeasible} not)"
        ));
    }
    Ok(())
}

/// `E` against a finite-difference Hessian of the rollout cost (1e-5
/// relative) and `Eθ + F` against its central-difference gradient (1e-6
/// relative).
pub fn check_derivatives(horizon: usize, seed: u64) -> Result<(), String> {
    let setup = two_mass_setup(horizon);
    let plan = &setup.plan;
    let weights = bench_weights(&setup.config, 2, 2);
    let mut r = rng(seed);
    let nth = horizon * plan.n_inputs();
    let (x_prev, x_p, u_prev) = random_plant_history(&mut r, plan, 1.0);
    let x = plan.model.state(&x_p, &x_prev).unwrap();
    let r_future = uniform_vector(&mut r, horizon * plan.n_outputs(), 1.2);
    let prob = plan.assemble_qp(&x, &r_future, &u_prev).unwrap();
    let cost = |th: &DVector<f64>| rollout_cost(plan, &weights, &x_p, &u_prev, th, &r_future);

    let theta = uniform_vector(&mut r, nth, 0.5);
    // the cost is quadratic, so a wide step has no truncation error and
    // keeps cancellation small
    let h = 1.0;
    let e = prob.hessian();
    let scale_e = e.amax();
    let base = cost(&theta);
    let unit = |i: usize| DVector::from_fn(nth, |k, _| if k == i { h } else { 0.0 });
    for i in 0..nth {
        for j in 0..nth {
            let fd = (cost(&(&theta + unit(i) + unit(j))) - cost(&(&theta + unit(i)))
                - cost(&(&theta + unit(j)))
                + base)
                / (h * h);
            if (fd - e[(i, j)]).abs() > 1e-5 * scale_e {
                return Err(format!("N={horizon}: E[{i},{j}] = {} vs finite difference {fd}", e[(i, j)]));
            }
        }
    }
    let grad = e * &theta + prob.grad();
    let scale_g = grad.amax().max(1.0);
    for i in 0..nth {
        let fd = (cost(&(&theta + unit(i))) - cost(&(&theta - unit(i)))) / (2.0 * h);
        if (fd - grad[i]).abs() > 1e-6 * scale_g {
            return Err(format!("N={horizon}: gradient[{i}] = {} vs finite difference {fd}", grad[i]));
        }
    }
    Ok(())
}

//! Exit criteria. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::mpc::{check_constraint_stack, check_derivatives, check_prediction};
use common::{inverse_update_sequence, random_feasible_qp, random_infeasible_qp, rng, InvariantProbe};
use imuqp::bench::{
    accuracy_measures, run_closed_loop, summarize, BenchConfig, BenchSetup, CheckSolver,
    ReferenceSpec, SimRecord,
};
use imuqp::mpc::constraint_rows;
use imuqp::qp::{
    memory_footprint, objective_value, predicted_flops_doubled, solve, solve_with,
    unconstrained_solution,
};
use imuqp::reference::enumerate_active_sets;
use imuqp::{QpProblem, SolveStatus, SolverOptions, SolverWorkspace};
use rand::Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

/// Instances shared by the KKT and oracle criteria.
fn kkt_instances() -> Vec<QpProblem> {
    let mut r = rng(1);
    (0..500)
        .map(|_| {
            let n = r.random_range(1..=6);
            let p = r.random_range(2..=16);
            random_feasible_qp(&mut r, n, p)
        })
        .collect()
}

fn solve_fresh(prob: &QpProblem) -> imuqp::QpSolution {
    solve(prob, &SolverOptions::default(), &mut SolverWorkspace::for_problem(prob))
        .expect("solver error")
}

fn kkt_correctness() -> Outcome {
    let mut worst = [0.0f64; 3];
    for (i, prob) in kkt_instances().iter().enumerate() {
        let sol = solve_fresh(prob);
        if sol.status != SolveStatus::Optimal {
            return Err(format!("instance {i}: status {:?}", sol.status));
        }
        let acc = accuracy_measures(prob, &sol, None);
        let f_norm = prob.grad().norm();
        let g_max = prob.gamma().amax();
        let scaled = [
            acc.stationarity / (1.0 + f_norm),
            acc.primal_feasibility / (1.0 + g_max),
            acc.complementary_slackness / (1.0 + f_norm + g_max),
        ];
        if acc.dual_feasibility != 0.0 {
            return Err(format!("instance {i}: dual feasibility {}", acc.dual_feasibility));
        }
        for (w, s) in worst.iter_mut().zip(scaled) {
            *w = w.max(s);
        }
        if scaled.iter().any(|&s| !(s <= 1e-7)) {
            return Err(format!("instance {i}: scaled residuals {scaled:?}"));
        }
    }
    Ok(format!(
        "500 instances, worst scaled stationarity {:.1e}, primal {:.1e}, slackness {:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for (i, prob) in kkt_instances().iter().enumerate() {
        let sol = solve_fresh(prob);
        let oracle = enumerate_active_sets(prob).map_err(|e| format!("instance {i}: {e}"))?;
        if sol.status != oracle.status {
            return Err(format!(
                "instance {i}: solver {:?}, enumeration {:?}",
                sol.status, oracle.status
            ));
        }
        let err = (&sol.theta - &oracle.theta).norm();
        worst = worst.max(err);
        if !(err <= 1e-7) {
            return Err(format!("instance {i}: ‖θ - θ_enum‖ = {err:e}"));
        }
    }
    let mut r = rng(2);
    for i in 0..100 {
        let n = r.random_range(2..=6);
        let prob = random_infeasible_qp(&mut r, n);
        let sol = solve_fresh(&prob);
        if sol.status != SolveStatus::Infeasible {
            return Err(format!("infeasible instance {i}: status {:?}", sol.status));
        }
    }
    Ok(format!("500/500 agree (max error {worst:.1e}), 100/100 infeasible detected"))
}

fn inverse_fidelity() -> Outcome {
    let mut r = rng(3);
    let mut compared = 0;
    for seq in 0..1000 {
        compared += inverse_update_sequence(&mut r).map_err(|e| format!("sequence {seq}: {e}"))?;
    }
    Ok(format!("1000 sequences, {compared} comparisons"))
}

fn convergence_invariants() -> Outcome {
    let mut r = rng(4);
    let (mut adds, mut removals, mut swaps) = (0, 0, 0);
    for i in 0..200 {
        let n = r.random_range(1..=6);
        let p = r.random_range(2..=16);
        let prob = random_feasible_qp(&mut r, n, p);
        let mut probe = InvariantProbe::new(&prob);
        let sol = solve_with(
            &prob,
            &SolverOptions::default(),
            &mut SolverWorkspace::for_problem(&prob),
            &mut probe,
        )
        .map_err(|e| e.to_string())?;
        if let Some(f) = probe.failures.first() {
            return Err(format!("instance {i}: {f}"));
        }
        if sol.status != SolveStatus::Optimal || sol.iterations > 3 * p {
            return Err(format!("instance {i}: {:?} after {} iterations", sol.status, sol.iterations));
        }
        let j0 = objective_value(&prob, &unconstrained_solution(&prob)).unwrap();
        let js = objective_value(&prob, &sol.theta).unwrap();
        if !(j0 <= js + 1e-10 * (1.0 + js.abs())) {
            return Err(format!("instance {i}: J(θ0) = {j0} > J(θ*) = {js}"));
        }
        adds += probe.adds;
        removals += probe.removals;
        swaps += probe.swaps;
    }
    Ok(format!("200 instances, {adds} adds, {removals} removals, {swaps} swaps"))
}

fn mpc_consistency() -> Outcome {
    for (i, n) in [1usize, 2, 4, 8].into_iter().enumerate() {
        let seed = 10 * i as u64;
        check_prediction(n, seed)?;
        check_constraint_stack(n, seed + 1)?;
        check_derivatives(n, seed + 2)?;
        let setup = common::mpc::two_mass_setup(n);
        let expected = 2 * (n + 1) * 2 + 4 * n * 2;
        if setup.plan.p() != expected {
            return Err(format!("N={n}: {} rows, expected {expected}", setup.plan.p()));
        }
    }
    let full = BenchSetup::new(&BenchConfig::default()).map_err(|e| e.to_string())?;
    if full.plan.p() != 984 || constraint_rows(27, 6, 6) != 984 {
        return Err(format!("six masses, N = 27: p = {}", full.plan.p()));
    }
    Ok("N in {1, 2, 4, 8} consistent, p = 984 at N = 27 with six masses".into())
}

fn check_limits(records: &[SimRecord], max_active: usize) -> Result<(), String> {
    for r in records {
        if !(r.u.amax() <= 1.0 + 1e-7) || !(r.du.amax() <= 0.5 + 1e-7) {
            return Err(format!("step {}: |u| = {}, |Δu| = {}", r.k, r.u.amax(), r.du.amax()));
        }
        if r.c_star > max_active {
            return Err(format!("step {}: c* = {} > {max_active}", r.k, r.c_star));
        }
    }
    Ok(())
}

fn sampled_errors(records: &[SimRecord], expected: usize) -> Result<f64, String> {
    let errs: Vec<f64> = records.iter().filter_map(|r| r.accuracy.error_vs_reference).collect();
    if errs.len() != expected {
        return Err(format!("{} reference comparisons, expected {expected}", errs.len()));
    }
    let worst = errs.iter().copied().fold(0.0, f64::max);
    if !(worst <= 1e-7) {
        return Err(format!("reference error {worst:e}"));
    }
    Ok(worst)
}

fn closed_loop_down_scaled() -> Outcome {
    let cfg = BenchConfig {
        check_solver: Some(CheckSolver::GoldfarbIdnani),
        check_samples: Some(20),
        ..BenchConfig::down_scaled()
    };
    let records = run_closed_loop(&cfg).map_err(|e| e.to_string())?;
    check_limits(&records, cfg.horizon * cfg.masses)?;
    let gi = sampled_errors(&records, 20)?;

    // the enumeration oracle only reaches horizon one
    let small = BenchConfig {
        horizon: 1,
        check_solver: Some(CheckSolver::Enumeration),
        ..cfg.clone()
    };
    let records = run_closed_loop(&small).map_err(|e| e.to_string())?;
    check_limits(&records, small.masses)?;
    let en = sampled_errors(&records, 20)?;
    Ok(format!(
        "1500 steps within limits, Goldfarb-Idnani error {gi:.1e} (N = 8), enumeration error {en:.1e} (N = 1)"
    ))
}

fn closed_loop_full_scale() -> Outcome {
    let cfg = BenchConfig::default();
    let records = run_closed_loop(&cfg).map_err(|e| e.to_string())?;
    if records.len() != cfg.steps {
        return Err(format!("{} records", records.len()));
    }
    check_limits(&records, cfg.horizon * cfg.masses)?;
    for r in &records {
        let a = &r.accuracy;
        let worst = a
            .stationarity
            .max(a.primal_feasibility)
            .max(a.dual_feasibility)
            .max(a.complementary_slackness);
        if !(worst <= 1e-6) {
            return Err(format!("step {}: accuracy measure {worst:e}", r.k));
        }
    }
    let s = summarize(&records, 33, cfg.steps).map_err(|e| e.to_string())?;
    Ok(format!(
        "avg solve {:.3} ms, max {:.3} ms, avg c* {:.1}, max stationarity {:.1e}, max primal {:.1e}, max slackness {:.1e}",
        s.solve_ns.avg / 1e6,
        s.solve_ns.max / 1e6,
        s.avg_c_star,
        s.stationarity.max,
        s.primal_feasibility.max,
        s.complementary_slackness.max
    ))
}

fn offset_free_tracking() -> Outcome {
    let cfg = BenchConfig {
        masses: 2,
        steps: 2000,
        reference: ReferenceSpec::Constant { value: 0.3 },
        ..BenchConfig::default()
    };
    let records = run_closed_loop(&cfg).map_err(|e| e.to_string())?;
    let err = records[records.len() - 200..]
        .iter()
        .map(|r| (&r.y - &r.r).amax())
        .fold(0.0, f64::max);
    if !(err <= 1e-6) {
        return Err(format!("tracking error {err:e} over the last 200 steps"));
    }
    Ok(format!("max tracking error {err:.1e} over the last 200 steps"))
}

/// Row sums of the per-step storage and operation tables, evaluated
/// independently of the closed forms.
fn formula_reproductions() -> Outcome {
    for n in 1u64..=40 {
        let nn = u128::from(n);
        let p = 6 * nn + 2;
        let w = p / 2;
        let imuqp = (nn * nn + nn + p * nn + p + p * p) + (nn + 2 * p + w * w + 2 * w);
        let qpoases = (nn * nn + nn + p * nn + p) + (3 * nn * nn + 5 * nn + 4 * p + 4);
        let row = memory_footprint(n);
        if (row.imuqp, row.qpoases) != (imuqp, qpoases) {
            return Err(format!("N={n}: footprint {row:?}, tables give ({imuqp}, {qpoases})"));
        }
        for c in [0, 1, w / 2, w] {
            for (tl, ta, tr) in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 5, 3)] {
                // every entry doubled to clear the halves
                let once = 2 * (2 * nn * nn) + 2 * (2 * p * nn) + 2 * p + 2 * 2
                    + 2 * (2 * nn * nn + nn * (2 * c + 1));
                let dep_or_indep = 2 * (2 * c * c + 3 * c + 1) + 2 * c + 2 * p * (2 * c + 1) + 2 * p;
                let dep = 2 * c + c + 2 * (4 * c * c + 5 * c + 1) + 2 * (4 * c * c + 10 * c + 4);
                let indep = 2 * (2 * c * c + 5 * c + 2);
                let removal = c + 2 * (4 * c * c + 5 * c + 1) + 2 * c;
                let expected = once
                    + tl * (dep_or_indep + dep)
                    + ta * (dep_or_indep + indep)
                    + tr * removal;
                let got = predicted_flops_doubled(
                    n,
                    p as u64,
                    c as u64,
                    tl as u64,
                    ta as u64,
                    tr as u64,
                );
                if got != expected {
                    return Err(format!(
                        "N={n} c={c} t=({tl},{ta},{tr}): {got} vs table sum {expected}"
                    ));
                }
            }
        }
    }
    Ok("N in 1..=40 exact".into())
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "KKT correctness", budget: Duration::from_secs(10), run: kkt_correctness },
        Criterion { id: 2, name: "oracle equivalence", budget: Duration::from_secs(30), run: oracle_equivalence },
        Criterion { id: 3, name: "inverse-update fidelity", budget: Duration::from_secs(5), run: inverse_fidelity },
        Criterion { id: 4, name: "convergence invariants", budget: Duration::from_secs(10), run: convergence_invariants },
        Criterion { id: 5, name: "MPC pipeline consistency", budget: Duration::from_secs(20), run: mpc_consistency },
        Criterion { id: 6, name: "closed loop, down-scaled", budget: Duration::from_secs(120), run: closed_loop_down_scaled },
        Criterion { id: 7, name: "closed loop, full scale", budget: Duration::from_secs(900), run: closed_loop_full_scale },
        Criterion { id: 8, name: "offset-free tracking", budget: Duration::from_secs(60), run: offset_free_tracking },
        Criterion { id: 9, name: "formula reproductions", budget: Duration::from_secs(1), run: formula_reproductions },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!(
                "{detail}; runtime {elapsed:.2?} exceeds {:?}",
                c.budget
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {}. {} ({elapsed:.2?}): {detail}", c.id, c.name),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {} ({elapsed:.2?}): {reason}", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}

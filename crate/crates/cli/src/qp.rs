use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use imuqp::bench::accuracy_measures;
use imuqp::qpfile::parse_qp_file;
use imuqp::reference::{
    enumerate_active_sets, hildreth_solve, HildrethOptions, ENUMERATION_MAX_N, ENUMERATION_MAX_P,
};
use imuqp::{Error, QpProblem, QpSolution, SolveStatus, SolverWorkspace};

use crate::{read_file, status_code, Report, SolverFlags, EXIT_DISAGREE};

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// QP file with sections n, p, E, F, M, gamma.
    pub path: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long, value_enum, default_value_t = Report::Kkt)]
    pub report: Report,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub path: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
}

const HILDRETH_TOL: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-7;

fn load(path: &PathBuf) -> anyhow::Result<QpProblem> {
    let text = read_file(path)?;
    let doc = parse_qp_file(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(doc.to_problem()?)
}

fn list<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Scientific notation with negative zero printed as zero.
fn sci(x: f64) -> String {
    format!("{:e}", x + 0.0)
}

fn report(prob: &QpProblem, sol: &QpSolution, kkt: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {:?}", sol.status);
    let _ = writeln!(s, "theta: {}", list(sol.theta.iter()));
    let _ = writeln!(s, "lambda: {}", list(&sol.lambda_active));
    let _ = writeln!(s, "active: {}", list(&sol.active));
    let _ = writeln!(s, "c_star: {}", sol.c_star());
    let _ = writeln!(s, "m_star: {}", sol.iterations);
    let e = sol.events;
    let _ = writeln!(
        s,
        "events: dependent_adds={} independent_adds={} removals={}",
        e.dependent_adds, e.independent_adds, e.removals
    );
    if let Some(cert) = &sol.certificate {
        let y_max = cert.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            s,
            "infeasible: constraint {} is dependent on the active set {:?} (q = {:e}) with max(y) = {} <= 0",
            cert.violated, cert.active, cert.q, if cert.weights.is_empty() { 0.0 } else { y_max }
        );
    }
    if kkt {
        let acc = accuracy_measures(prob, sol, None);
        let _ = writeln!(s, "stationarity: {}", sci(acc.stationarity));
        let _ = writeln!(s, "primal_feasibility: {}", sci(acc.primal_feasibility));
        let _ = writeln!(s, "dual_feasibility: {}", sci(acc.dual_feasibility));
        let _ = writeln!(s, "complementary_slackness: {}", sci(acc.complementary_slackness));
    }
    s
}

pub fn solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let prob = load(&args.path)?;
    let mut ws = SolverWorkspace::for_problem(&prob);
    let sol = imuqp::solve(&prob, &args.solver.options(), &mut ws)?;
    print!("{}", report(&prob, &sol, args.report == Report::Kkt));
    Ok(status_code(sol.status))
}

/// Outcome of comparing the three solvers on one problem.
#[derive(Debug, PartialEq)]
pub struct Verdict {
    pub agree: bool,
    pub lines: Vec<String>,
}

pub fn compare(prob: &QpProblem, flags: &SolverFlags) -> anyhow::Result<Verdict> {
    if prob.n() > ENUMERATION_MAX_N || prob.p() > ENUMERATION_MAX_P {
        return Err(Error::SizeLimit {
            n: prob.n(),
            p: prob.p(),
        }
        .into());
    }
    let mut ws = SolverWorkspace::for_problem(prob);
    let ours = imuqp::solve(prob, &flags.options(), &mut ws)?;
    let hildreth = hildreth_solve(
        prob,
        &HildrethOptions {
            tol: 1e-12,
            max_iter: 100_000,
        },
    )?;
    let oracle = enumerate_active_sets(prob)?;

    let mut lines = vec![
        format!("imuqp: {:?}", ours.status),
        format!("enumeration: {:?}", oracle.status),
    ];
    let agree = match oracle.status {
        SolveStatus::Infeasible => {
            // Hildreth does not detect infeasibility, so it has no vote here.
            lines.push(format!(
                "hildreth: {:?} (excluded: cannot detect infeasibility)",
                hildreth.status
            ));
            ours.status == SolveStatus::Infeasible
        }
        _ => {
            let mut ok = ours.status == SolveStatus::Optimal;
            if ok {
                let d = (&ours.theta - &oracle.theta).norm();
                lines.push(format!("|theta - theta_enum| = {d:e} (tolerance {ORACLE_TOL:e})"));
                ok &= d <= ORACLE_TOL;
            }
            if hildreth.status == SolveStatus::Optimal {
                let d = (&ours.theta - &hildreth.theta).norm();
                lines.push(format!(
                    "hildreth: Optimal, |theta - theta_hildreth| = {d:e} (tolerance {HILDRETH_TOL:e})"
                ));
                ok &= d <= HILDRETH_TOL;
            } else {
                lines.push(format!("hildreth: {:?} (did not converge)", hildreth.status));
                ok = false;
            }
            ok
        }
    };
    Ok(Verdict { agree, lines })
}

pub fn verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let prob = load(&args.path)?;
    let verdict = compare(&prob, &args.solver)?;
    for line in &verdict.lines {
        println!("{line}");
    }
    println!("verdict: {}", if verdict.agree { "agree" } else { "disagree" });
    Ok(if verdict.agree { 0 } else { EXIT_DISAGREE })
}

mod bench;
mod qp;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imuqp::{DropRule, Error, SolveStatus};

/// Exit code for parse, usage and configuration errors.
pub const EXIT_ERROR: u8 = 1;
/// `verify` found the solvers in disagreement.
pub const EXIT_DISAGREE: u8 = 4;

/// One code per status, shared by every subcommand.
pub fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => 2,
        SolveStatus::IterationLimit | SolveStatus::CycleGuardTripped => 3,
    }
}

#[derive(Parser, Debug)]
#[command(name = "imuqp", version, about = "Dense active-set QP solver and MPC benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a QP file and print the solution.
    Solve(qp::SolveArgs),
    /// Solve a small QP file with this solver, Hildreth's method and active-set
    /// enumeration, and compare.
    Verify(qp::VerifyArgs),
    /// Run the closed-loop mass-chain benchmark.
    Bench(bench::BenchArgs),
    /// Print memory footprints for a range of horizons.
    Footprint(bench::FootprintArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    BlockingStep,
    LargestWeight,
}

impl From<RuleArg> for DropRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::BlockingStep => DropRule::BlockingStep,
            RuleArg::LargestWeight => DropRule::LargestWeight,
        }
    }
}

/// Solver flags shared by `solve` and `verify`.
#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// Linear-dependence threshold on q.
    #[arg(long, default_value_t = imuqp::qp::DEFAULT_EPS_Q)]
    pub eps_q: f64,
    /// Iteration cap; defaults to 3p.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Which active constraint leaves on swaps and after adds.
    #[arg(long, value_enum, default_value_t = RuleArg::BlockingStep)]
    pub drop_rule: RuleArg,
}

impl SolverFlags {
    pub fn options(&self) -> imuqp::SolverOptions {
        imuqp::SolverOptions {
            eps_q: self.eps_q,
            max_iter: self.max_iter,
            drop_rule: self.drop_rule.into(),
            ..Default::default()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Report {
    /// Solution and counters only.
    Summary,
    /// Also the KKT residual measures.
    Kkt,
}

pub fn read_file(path: &PathBuf) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve(args) => qp::solve(&args),
        Command::Verify(args) => qp::verify(&args),
        Command::Bench(args) => bench::bench(&args),
        Command::Footprint(args) => bench::footprint(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::ClosedLoopHalted { status, .. }) => status_code(*status),
                _ => EXIT_ERROR,
            };
            ExitCode::from(code)
        }
    }
}

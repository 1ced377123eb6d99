#![no_main]

use imuqp::qpfile::parse_qp_file;
use imuqp::{SolveStatus, SolverOptions, SolverWorkspace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let Ok(doc) = parse_qp_file(text) else {
        return;
    };
    if doc.n() > 12 || doc.p() > 32 {
        return;
    }
    let Ok(prob) = doc.to_problem() else {
        return;
    };
    let mut ws = SolverWorkspace::for_problem(&prob);
    let Ok(sol) = imuqp::solve(&prob, &SolverOptions::default(), &mut ws) else {
        return;
    };
    assert!(sol.iterations <= 3 * prob.p() + 1);
    assert_eq!(sol.lambda_active.len(), sol.active.len());
    if sol.status == SolveStatus::Optimal {
        assert!(sol.lambda_active.iter().all(|&l| l >= 0.0));
    }
});

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qp::{QpProblem, QpSolution};

/// KKT residuals of a QP solution and its distance to a reference solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AccuracyReport {
    /// `‖Eθ + F + M'λ‖₂`
    pub stationarity: f64,
    /// Euclidean norm of the positive part of `Mθ - γ`.
    pub primal_feasibility: f64,
    /// Euclidean norm of the negative part of `λ`.
    pub dual_feasibility: f64,
    /// `|λ'(Mθ - γ)|`
    pub complementary_slackness: f64,
    /// `‖θ - θ_ref‖₂` when a reference is supplied.
    pub error_vs_reference: Option<f64>,
}

pub fn accuracy_measures(
    prob: &QpProblem,
    sol: &QpSolution,
    theta_ref: Option<&DVector<f64>>,
) -> AccuracyReport {
    let lambda = sol.lambda_full(prob.p());
    let theta = &sol.theta;
    let stationarity =
        (prob.hessian() * theta + prob.grad() + prob.constraints().transpose() * &lambda).norm();
    let slack = prob.constraints() * theta - prob.gamma();
    let primal_feasibility = slack.iter().map(|s| s.max(0.0).powi(2)).sum::<f64>().sqrt();
    let dual_feasibility = lambda.iter().map(|l| l.min(0.0).powi(2)).sum::<f64>().sqrt();
    let complementary_slackness = lambda.dot(&slack).abs();
    AccuracyReport {
        stationarity,
        primal_feasibility,
        dual_feasibility,
        complementary_slackness,
        error_vs_reference: theta_ref.map(|r| (theta - r).norm()),
    }
}

/// Average, maximum and minimum over a sample window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunAggregate {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

/// Statistics of `values[k_a - 1 ..= k_b - 1]` (one-based, inclusive window).
pub fn aggregate(values: &[f64], k_a: usize, k_b: usize) -> Result<RunAggregate> {
    if k_a < 1 || k_a >= k_b || k_b > values.len() {
        return Err(Error::WindowOutOfRange {
            k_a,
            k_b,
            len: values.len(),
        });
    }
    let window = &values[k_a - 1..k_b];
    let sum: f64 = window.iter().sum();
    Ok(RunAggregate {
        avg: sum / window.len() as f64,
        max: window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: window.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

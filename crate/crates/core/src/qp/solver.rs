use nalgebra::DVector;

use crate::error::{Error, Result};

use super::{
    DropRule, EventCounts, InfeasibilityCertificate, QpProblem, QpSolution, SolveStatus, SolverOptions,
    SolverWorkspace,
};

/// Points at which [`solve_with`] reports progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveEvent {
    /// `index` entered the active set; `swapped_out` is the dependent
    /// constraint removed just before, if any.
    Added {
        index: usize,
        swapped_out: Option<usize>,
    },
    /// `index` left the active set because its multiplier was negative.
    Removed { index: usize },
    /// The violation vector was recomputed for the current active set.
    ViolationUpdated,
}

/// Hook for instrumenting a solve. The workspace is in a consistent state
/// whenever an event is delivered.
pub trait SolveObserver {
    fn on_event(&mut self, event: SolveEvent, ws: &SolverWorkspace, prob: &QpProblem);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoObserver;

impl SolveObserver for NoObserver {
    #[inline]
    fn on_event(&mut self, _: SolveEvent, _: &SolverWorkspace, _: &QpProblem) {}
}

/// Solves `prob` from a cold start using `ws` as scratch.
pub fn solve(
    prob: &QpProblem,
    opts: &SolverOptions,
    ws: &mut SolverWorkspace,
) -> Result<QpSolution> {
    solve_with(prob, opts, ws, &mut NoObserver)
}

/// Lowest index of the minimum; `None` when empty.
fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Position minimizing `λ_r / y_r` over `y_r > 0`, reported with its `y_r`.
fn smallest_ratio(lambda: &[f64], y: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (&l, &w)) in lambda.iter().zip(y).enumerate() {
        if !(w > 0.0) {
            continue;
        }
        let ratio = l / w;
        match best {
            Some((_, _, b)) if ratio >= b => {}
            _ => best = Some((i, w, ratio)),
        }
    }
    best.map(|(i, w, _)| (i, w)).or_else(|| argmax(y))
}

/// First active multiplier other than the entering `j` to change sign on the
/// segment from `start` to `lambda`, with the fraction of the segment at which
/// it does.
fn first_blocking(ws: &SolverWorkspace, j: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for r in 0..ws.c {
        let (s, l) = (ws.start[r], ws.lambda[r]);
        if !(l < 0.0) || ws.active[r] == j {
            continue;
        }
        let alpha = s / (s - l);
        match best {
            Some((_, b)) if alpha >= b => {}
            _ => best = Some((r, alpha)),
        }
    }
    best
}

pub fn solve_with<O: SolveObserver + ?Sized>(
    prob: &QpProblem,
    opts: &SolverOptions,
    ws: &mut SolverWorkspace,
    observer: &mut O,
) -> Result<QpSolution> {
    ws.reset(prob)?;
    let p = prob.p();
    let cap = opts.iteration_cap(p);
    let mut status = SolveStatus::Optimal;
    let mut certificate = None;
    let mut active_residual = 0.0f64;

    let mut next = argmin(&ws.k);
    'outer: while let Some((j, k_min)) = next {
        if k_min >= 0.0 || k_min.is_nan() {
            break;
        }
        if ws.is_active[j] {
            status = SolveStatus::CycleGuardTripped;
            break;
        }
        if ws.iterations >= cap {
            status = SolveStatus::IterationLimit;
            break;
        }

        // With an empty active set this reduces to q = H[j, j] and y = ().
        let q = ws.compute_dependence(prob, j);
        if q <= opts.eps_q && opts.recheck_dependent {
            // m_j = Σ y_r m_r, so on the active face K_j = γ_j - Σ y_r γ_r
            // exactly; the accumulated K_j may only be roundoff.
            // Values within the summation error bound of that expression
            // count as zero: the row is then weakly active and redundant.
            let gamma = prob.gamma();
            let (mut exact, mut magnitude) = (gamma[j], gamma[j].abs());
            for (y, &a) in ws.y[..ws.c].iter().zip(&ws.active[..ws.c]) {
                exact -= y * gamma[a];
                magnitude += (y * gamma[a]).abs();
            }
            let rounding = (ws.c + 1) as f64 * f64::EPSILON * magnitude;
            if exact >= -rounding {
                ws.k[j] = exact.max(0.0);
                next = argmin(&ws.k);
                continue;
            }
        }
        ws.iterations += 1;

        let mut swapped_out = None;
        if q <= opts.eps_q {
            let pick = match opts.drop_rule {
                DropRule::LargestWeight => argmax(&ws.y[..ws.c]),
                DropRule::BlockingStep => smallest_ratio(&ws.lambda[..ws.c], &ws.y[..ws.c]),
            };
            match pick {
                Some((f, y_max)) if y_max > 0.0 => {
                    // partial step: λ_A - t y with λ_f reaching zero, j entering at t
                    let c = ws.c;
                    let t = (ws.lambda[f] / y_max).max(0.0);
                    for r in 0..c {
                        ws.start[r] = (ws.lambda[r] - t * ws.y[r]).max(0.0);
                    }
                    ws.start.copy_within(f + 1..c, f);
                    ws.start[c - 1] = t;
                    let removed = ws.active[f];
                    ws.simu(f)?;
                    let q = ws.compute_dependence(prob, j);
                    if q <= 0.0 || !q.is_finite() {
                        return Err(Error::DependentConstraint { index: j, q });
                    }
                    ws.apply_add(j, q);
                    ws.events.dependent_adds += 1;
                    swapped_out = Some(removed);
                }
                _ => {
                    certificate = Some(InfeasibilityCertificate {
                        violated: j,
                        q,
                        weights: ws.y[..ws.c].to_vec(),
                        active: ws.active().to_vec(),
                    });
                    status = SolveStatus::Infeasible;
                    break;
                }
            }
        } else {
            if ws.c == ws.capacity {
                return Err(Error::CapacityExceeded {
                    capacity: ws.capacity,
                });
            }
            ws.start[..ws.c].copy_from_slice(&ws.lambda[..ws.c]);
            ws.start[ws.c] = 0.0;
            ws.apply_add(j, q);
            ws.events.independent_adds += 1;
        }
        observer.on_event(
            SolveEvent::Added {
                index: j,
                swapped_out,
            },
            ws,
            prob,
        );

        loop {
            let blocking = match opts.drop_rule {
                DropRule::LargestWeight => None,
                DropRule::BlockingStep => first_blocking(ws, j),
            };
            let pos = match blocking {
                Some((pos, alpha)) => {
                    let c = ws.c;
                    for (s, l) in ws.start[..c].iter_mut().zip(&ws.lambda[..c]) {
                        *s = (*s + alpha * (l - *s)).max(0.0);
                    }
                    pos
                }
                // also catches roundoff-level negatives the step rule skips
                None => match argmin(&ws.lambda[..ws.c]) {
                    Some((pos, l_min)) if l_min < 0.0 => pos,
                    _ => break,
                },
            };
            if ws.iterations >= cap {
                status = SolveStatus::IterationLimit;
                break 'outer;
            }
            ws.iterations += 1;
            let removed = ws.active[pos];
            ws.start.copy_within(pos + 1..ws.c, pos);
            ws.simu(pos)?;
            ws.events.removals += 1;
            observer.on_event(SolveEvent::Removed { index: removed }, ws, prob);
        }

        update_violation(prob, opts, ws, &mut active_residual);
        observer.on_event(SolveEvent::ViolationUpdated, ws, prob);
        next = argmin(&ws.k);
    }

    Ok(QpSolution {
        theta: current_iterate(prob, ws)?,
        lambda_active: ws.lambda().to_vec(),
        active: ws.active().to_vec(),
        iterations: ws.iterations,
        status,
        events: ws.events,
        certificate,
        active_residual,
    })
}

/// `K = K0 + sum_r λ_r H[:, a_r]`.
fn update_violation(
    prob: &QpProblem,
    opts: &SolverOptions,
    ws: &mut SolverWorkspace,
    residual: &mut f64,
) {
    let mats = prob.matrices();
    ws.k.copy_from_slice(&ws.k0);
    for r in 0..ws.c {
        let l = ws.lambda[r];
        for (k, h) in ws.k.iter_mut().zip(mats.dual_column(ws.active[r])) {
            *k += l * h;
        }
    }
    let mut worst = 0.0f64;
    for &a in &ws.active[..ws.c] {
        worst = worst.max(ws.k[a].abs());
        if opts.pin_active_residual {
            ws.k[a] = 0.0;
        }
    }
    *residual = worst;
}

/// `θ = θ0 - E^-1 M_A' λ_A` for the workspace's current active set.
pub(crate) fn current_iterate(prob: &QpProblem, ws: &SolverWorkspace) -> Result<DVector<f64>> {
    let mats = prob.matrices();
    let mut kappa = vec![0.0; prob.n()];
    for (&a, &l) in ws.active().iter().zip(ws.lambda()) {
        for (k, m) in kappa.iter_mut().zip(mats.constraint_row(a)) {
            *k += l * m;
        }
    }
    mats.factor().solve_inplace(&mut kappa)?;
    Ok(DVector::from_iterator(
        prob.n(),
        ws.theta0.iter().zip(&kappa).map(|(t, k)| t - k),
    ))
}

impl SolverWorkspace {
    /// Primal iterate for the current active set and multipliers.
    pub fn iterate(&self, prob: &QpProblem) -> Result<DVector<f64>> {
        current_iterate(prob, self)
    }
}

impl EventCounts {
    pub fn total(&self) -> usize {
        self.dependent_adds + self.independent_adds + self.removals
    }
}

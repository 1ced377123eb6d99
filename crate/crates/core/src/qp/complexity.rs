//! Closed-form cost models for the solver in the single-input single-output
//! MPC setting.

/// Memory footprint, in stored scalars, of this solver and of an online
/// active-set solver of the qpOASES family, for horizon `N` with one input and
/// one output (so `p = 6N + 2` and capacity `3N + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FootprintRow {
    pub horizon: u64,
    pub imuqp: u128,
    pub qpoases: u128,
}

pub fn memory_footprint(horizon: u64) -> FootprintRow {
    let n = u128::from(horizon);
    FootprintRow {
        horizon,
        imuqp: 52 * n * n + 58 * n + 13,
        qpoases: 10 * n * n + 38 * n + 14,
    }
}

/// Twice the predicted operation count. The model has half-integer
/// coefficients, so doubling keeps the evaluation exact.
pub fn predicted_flops_doubled(
    horizon: u64,
    p: u64,
    c: u64,
    t_l: u64,
    t_a: u64,
    t_r: u64,
) -> u128 {
    let [n, p, c, t_l, t_a, t_r] = [horizon, p, c, t_l, t_a, t_r].map(u128::from);
    let base = 8 * n * n + n * (4 * (p + c) + 2) + 2 * p + 4;
    let shared = 4 * p * (c + 1);
    base + t_l * (20 * c * c + 41 * c + shared + 12)
        + t_a * (8 * c * c + 18 * c + shared + 6)
        + t_r * (8 * c * c + 13 * c + 2)
}

/// Predicted arithmetic operation count of one solve. `c` is a single
/// representative active-set size (the model does not track how `c` varies
/// across events); callers typically pass the final `c*`.
pub fn predicted_flops(horizon: u64, p: u64, c: u64, t_l: u64, t_a: u64, t_r: u64) -> f64 {
    predicted_flops_doubled(horizon, p, c, t_l, t_a, t_r) as f64 / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprint_at_one() {
        let row = memory_footprint(1);
        assert_eq!((row.imuqp, row.qpoases), (123, 62));
    }

    #[test]
    fn footprint_leading_ratio() {
        let a = memory_footprint(100_000);
        let ratio = a.imuqp as f64 / a.qpoases as f64;
        assert!((ratio - 5.2).abs() < 1e-3);
    }

    #[test]
    fn flops_without_events() {
        assert_eq!(predicted_flops(1, 8, 0, 0, 0, 0), 31.0);
        for n in 1..10u64 {
            for p in 0..20u64 {
                let expected = 4 * n * n + n * (2 * p + 1) + p + 2;
                assert_eq!(predicted_flops(n, p, 0, 0, 0, 0), expected as f64);
            }
        }
    }

    #[test]
    fn flops_single_add() {
        // 4*729 + 27*(2*174 + 1) + 164 + 2 + (400 + 90 + 2*164*11 + 3)
        let expected = 2916.0 + 27.0 * 349.0 + 166.0 + 400.0 + 90.0 + 3608.0 + 3.0;
        assert_eq!(predicted_flops(27, 164, 10, 0, 1, 0), expected);
    }

    #[test]
    fn flops_half_integers() {
        // c = 1, one removal: 4 + 6.5 + 1
        let base = predicted_flops(1, 0, 1, 0, 0, 0);
        assert_eq!(predicted_flops(1, 0, 1, 0, 0, 1) - base, 11.5);
        // c = 1, one dependent add with p = 0: 10 + 20.5 + 6
        assert_eq!(predicted_flops(1, 0, 1, 1, 0, 0) - base, 36.5);
    }
}

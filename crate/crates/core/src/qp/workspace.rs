use crate::error::{check_len, Error, Result};

use super::{EventCounts, QpProblem};

/// Preallocated active-set state.
///
/// `h_inv` is a `capacity x capacity` row-major buffer whose leading `c x c`
/// block holds the inverse of the active block of the dual Hessian; `lambda`
/// holds the active multipliers in the same order as `active`. Removal
/// compacts both so the valid region stays contiguous.
#[derive(Debug, Clone)]
pub struct SolverWorkspace {
    pub(super) capacity: usize,
    pub(super) n: usize,
    pub(super) p: usize,
    pub(super) active: Vec<usize>,
    pub(super) c: usize,
    pub(super) h_inv: Vec<f64>,
    pub(super) lambda: Vec<f64>,
    pub(super) is_active: Vec<bool>,
    // y = H_A^-1 h from the last dependence check, and the gathered h
    pub(super) y: Vec<f64>,
    pub(super) hvec: Vec<f64>,
    pub(super) y_for: Option<(usize, f64)>,
    pub(super) removed_col: Vec<f64>,
    // multipliers at the start of the current dual step
    pub(super) start: Vec<f64>,
    pub(super) theta0: Vec<f64>,
    pub(super) k0: Vec<f64>,
    pub(super) k: Vec<f64>,
    pub(super) iterations: usize,
    pub(super) events: EventCounts,
}

impl SolverWorkspace {
    pub fn new(n: usize, p: usize, capacity: usize) -> Self {
        let capacity = capacity.min(p);
        SolverWorkspace {
            capacity,
            n,
            p,
            active: vec![0; capacity],
            c: 0,
            h_inv: vec![0.0; capacity * capacity],
            lambda: vec![0.0; capacity],
            is_active: vec![false; p],
            y: vec![0.0; capacity],
            hvec: vec![0.0; capacity],
            y_for: None,
            removed_col: vec![0.0; capacity],
            start: vec![0.0; capacity],
            theta0: vec![0.0; n],
            k0: vec![0.0; p],
            k: vec![0.0; p],
            iterations: 0,
            events: EventCounts::default(),
        }
    }

    pub fn for_problem(prob: &QpProblem) -> Self {
        Self::new(prob.n(), prob.p(), prob.matrices().capacity())
    }

    /// Clears the active set and computes `θ0` and `K0` for `prob`.
    pub fn reset(&mut self, prob: &QpProblem) -> Result<()> {
        check_len("workspace variables", self.n, prob.n())?;
        check_len("workspace constraints", self.p, prob.p())?;
        for &i in &self.active[..self.c] {
            self.is_active[i] = false;
        }
        self.c = 0;
        self.y_for = None;
        self.iterations = 1;
        self.events = EventCounts::default();

        let mats = prob.matrices();
        for (t, g) in self.theta0.iter_mut().zip(prob.grad().iter()) {
            *t = -g;
        }
        mats.factor().solve_inplace(&mut self.theta0)?;

        // K0 = γ - M θ0, accumulated column by column of M
        self.k0.copy_from_slice(prob.gamma().as_slice());
        let m = mats.constraints().as_slice();
        for (j, &tj) in self.theta0.iter().enumerate() {
            if tj != 0.0 {
                for (k, mij) in self.k0.iter_mut().zip(&m[j * self.p..(j + 1) * self.p]) {
                    *k -= mij * tj;
                }
            }
        }
        self.k.copy_from_slice(&self.k0);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of active constraints.
    pub fn c(&self) -> usize {
        self.c
    }

    pub fn active(&self) -> &[usize] {
        &self.active[..self.c]
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.is_active.get(j).copied().unwrap_or(false)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda[..self.c]
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn k0(&self) -> &[f64] {
        &self.k0
    }

    /// Violation vector from the most recent update.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn events(&self) -> EventCounts {
        self.events
    }

    /// Copy of the leading `c x c` block of the maintained inverse.
    pub fn active_inverse(&self) -> nalgebra::DMatrix<f64> {
        let cap = self.capacity;
        nalgebra::DMatrix::from_fn(self.c, self.c, |r, t| self.h_inv[r * cap + t])
    }

    /// Computes `y = H_A^-1 h` and `q = h - h' y`, where `h` gathers the
    /// entries of `H` at (active, `j`) and `h = H[j, j]`.
    pub fn dependence_check(&mut self, prob: &QpProblem, j: usize) -> Result<(f64, &[f64])> {
        if j >= self.p {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.p,
            });
        }
        let q = self.compute_dependence(prob, j);
        Ok((q, &self.y[..self.c]))
    }

    pub(super) fn compute_dependence(&mut self, prob: &QpProblem, j: usize) -> f64 {
        let c = self.c;
        let cap = self.capacity;
        let hcol = prob.matrices().dual_column(j);
        for (h, &a) in self.hvec[..c].iter_mut().zip(&self.active[..c]) {
            *h = hcol[a];
        }
        let mut q = hcol[j];
        for r in 0..c {
            let row = &self.h_inv[r * cap..r * cap + c];
            let yr: f64 = row.iter().zip(&self.hvec[..c]).map(|(a, b)| a * b).sum();
            self.y[r] = yr;
            q -= self.hvec[r] * yr;
        }
        self.y_for = Some((j, q));
        q
    }

    /// Adds constraint `j`, updating the inverse block and the multipliers.
    ///
    /// Fails with [`Error::DependentConstraint`] when `j` is (numerically)
    /// linearly dependent on the active set, i.e. `q <= 0`.
    pub fn aimu(&mut self, prob: &QpProblem, j: usize) -> Result<()> {
        if j >= self.p {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.p,
            });
        }
        if self.is_active[j] {
            return Err(Error::AlreadyActive { index: j });
        }
        if self.c == self.capacity {
            return Err(Error::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        let q = match self.y_for {
            Some((cached, q)) if cached == j => q,
            _ => self.compute_dependence(prob, j),
        };
        if q <= 0.0 || !q.is_finite() {
            return Err(Error::DependentConstraint { index: j, q });
        }
        self.apply_add(j, q);
        Ok(())
    }

    /// Rank-one bordering update with `y`, `hvec` and `q` already computed for `j`.
    pub(super) fn apply_add(&mut self, j: usize, q: f64) {
        let c = self.c;
        let cap = self.capacity;
        debug_assert!(c < cap);

        // s = k + h' λ_old equals the current violation of constraint j
        let s = self.k0[j]
            + self.hvec[..c]
                .iter()
                .zip(&self.lambda[..c])
                .map(|(h, l)| h * l)
                .sum::<f64>();
        let inv_q = 1.0 / q;
        for r in 0..c {
            let yr = self.y[r] * inv_q;
            let row = &mut self.h_inv[r * cap..r * cap + c];
            for (v, yt) in row.iter_mut().zip(&self.y[..c]) {
                *v += yr * yt;
            }
            self.h_inv[r * cap + c] = -yr;
            self.h_inv[c * cap + r] = -yr;
            self.lambda[r] += yr * s;
        }
        self.h_inv[c * cap + c] = inv_q;
        self.lambda[c] = -s * inv_q;
        self.active[c] = j;
        self.is_active[j] = true;
        self.c = c + 1;
        self.y_for = None;
    }

    /// Removes the entry at position `pos` (zero-based) of the active set.
    pub fn simu(&mut self, pos: usize) -> Result<()> {
        let c = self.c;
        if pos >= c {
            return Err(Error::IndexOutOfRange { index: pos, len: c });
        }
        let cap = self.capacity;
        let pivot = self.h_inv[pos * cap + pos];
        for r in 0..c {
            self.removed_col[r] = self.h_inv[r * cap + pos];
        }
        let scale = self.lambda[pos] / pivot;

        // destinations never overtake their sources in row-major order
        for r_new in 0..c - 1 {
            let r = r_new + usize::from(r_new >= pos);
            let cr = self.removed_col[r] / pivot;
            for t_new in 0..c - 1 {
                let t = t_new + usize::from(t_new >= pos);
                self.h_inv[r_new * cap + t_new] =
                    self.h_inv[r * cap + t] - cr * self.removed_col[t];
            }
            self.lambda[r_new] = self.lambda[r] - scale * self.removed_col[r];
        }
        let removed = self.active[pos];
        self.active.copy_within(pos + 1..c, pos);
        self.is_active[removed] = false;
        self.c = c - 1;
        self.y_for = None;
        Ok(())
    }
}

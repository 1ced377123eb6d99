//! Dense kernels: Gaussian elimination without pivoting for symmetric
//! positive-definite matrices, triangular substitution, and the dual Hessian
//! `M E^-1 M^T`.
//!
//! This is the only place a matrix is factorized. Everything downstream works
//! with the packed factors through [`FactoredSpd::solve_inplace`].

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Pivots at or below this value abort the factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Relative tolerance for the symmetry check on the input matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// LU factors of a symmetric positive-definite matrix, packed into one dense
/// matrix: the strictly lower part holds the unit-lower factor (without its
/// diagonal), the upper part including the diagonal holds the upper factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredSpd {
    n: usize,
    packed_lu: DMatrix<f64>,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factorizes `e` by Gaussian elimination without pivoting.
///
/// The upper triangle is taken as authoritative once symmetry has been checked.
pub fn factorize_spd(e: &DMatrix<f64>) -> Result<FactoredSpd> {
    let n = e.nrows();
    check_len("factorize_spd (square)", n, e.ncols())?;
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "factorize_spd (empty matrix)",
            expected: 1,
            found: 0,
        });
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("hessian (non-finite entries)"));
    }
    let scale = inf_norm(e).max(f64::MIN_POSITIVE);
    for col in 0..n {
        for row in (col + 1)..n {
            if (e[(row, col)] - e[(col, row)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { row, col });
            }
        }
    }

    let mut a = DMatrix::from_fn(n, n, |i, j| if i <= j { e[(i, j)] } else { e[(j, i)] });
    for k in 0..n {
        let pivot = a[(k, k)];
        if pivot <= PIVOT_FLOOR || !pivot.is_finite() {
            return Err(Error::PivotBreakdown { index: k, pivot });
        }
        for i in (k + 1)..n {
            a[(i, k)] /= pivot;
        }
        for j in (k + 1)..n {
            let akj = a[(k, j)];
            if akj == 0.0 {
                continue;
            }
            // column j below the pivot row is contiguous in column-major storage
            let (left, right) = a.as_mut_slice().split_at_mut(j * n);
            let lcol = &left[k * n + k + 1..k * n + n];
            let col = &mut right[k + 1..n];
            for (x, l) in col.iter_mut().zip(lcol) {
                *x -= l * akj;
            }
        }
    }
    Ok(FactoredSpd { n, packed_lu: a })
}

impl FactoredSpd {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn packed_lu(&self) -> &DMatrix<f64> {
        &self.packed_lu
    }

    /// Unit lower-triangular factor `E_L + I`.
    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed_lu[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    /// Upper-triangular factor `E_U`.
    pub fn upper(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i <= j { self.packed_lu[(i, j)] } else { 0.0 })
    }

    /// Overwrites `x` with `E^-1 x` (forward then backward substitution).
    pub fn solve_inplace(&self, x: &mut [f64]) -> Result<()> {
        check_len("solve_inplace rhs", self.n, x.len())?;
        let n = self.n;
        let lu = self.packed_lu.as_slice();
        for k in 0..n {
            let xk = x[k];
            if xk != 0.0 {
                let col = &lu[k * n + k + 1..(k + 1) * n];
                for (xi, l) in x[k + 1..].iter_mut().zip(col) {
                    *xi -= l * xk;
                }
            }
        }
        for k in (0..n).rev() {
            x[k] /= lu[k * n + k];
            let xk = x[k];
            if xk != 0.0 {
                let col = &lu[k * n..k * n + k];
                for (xi, u) in x[..k].iter_mut().zip(col) {
                    *xi -= u * xk;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = rhs.clone();
        self.solve_inplace(x.as_mut_slice())?;
        Ok(x)
    }
}

/// Builds `H = M E^-1 M^T` one column of `eta = E^-1 M^T` at a time.
/// The result is exactly symmetric: only the upper triangle is computed.
pub fn dual_hessian(f: &FactoredSpd, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("dual_hessian (constraint columns)", f.n(), m.ncols())?;
    let p = m.nrows();
    let eta = inverse_times_transpose(f, m)?;
    let mut h = DMatrix::zeros(p, p);
    for j in 0..p {
        let eta_j = eta.column(j);
        for i in 0..=j {
            let v = m.row(i).transpose().dot(&eta_j);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// `E^-1 M^T`, an `n x p` matrix.
pub fn inverse_times_transpose(f: &FactoredSpd, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("inverse_times_transpose (constraint columns)", f.n(), m.ncols())?;
    let mut eta = m.transpose();
    for mut col in eta.column_iter_mut() {
        let mut buf: Vec<f64> = col.iter().copied().collect();
        f.solve_inplace(&mut buf)?;
        col.copy_from_slice(&buf);
    }
    Ok(eta)
}

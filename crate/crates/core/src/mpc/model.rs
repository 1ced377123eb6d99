use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Continuous-time plant `ẋ = A_c x + B_c u + w_c`, `y = C_c x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtModel {
    pub a_c: DMatrix<f64>,
    pub b_c: DMatrix<f64>,
    pub w_c: DVector<f64>,
    pub c_c: DMatrix<f64>,
}

impl CtModel {
    pub fn new(
        a_c: DMatrix<f64>,
        b_c: DMatrix<f64>,
        w_c: DVector<f64>,
        c_c: DMatrix<f64>,
    ) -> Result<Self> {
        let nx = a_c.nrows();
        check_len("A_c columns", nx, a_c.ncols())?;
        check_len("B_c rows", nx, b_c.nrows())?;
        check_len("w_c length", nx, w_c.len())?;
        check_len("C_c columns", nx, c_c.ncols())?;
        Ok(CtModel { a_c, b_c, w_c, c_c })
    }

    pub fn n_states(&self) -> usize {
        self.a_c.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_c.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c_c.nrows()
    }
}

/// Discrete-time plant `x⁺ = A_d x + B_d u + w_d`, `y = C_d x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub w_d: DVector<f64>,
    pub c_d: DMatrix<f64>,
}

impl DiscreteModel {
    pub fn n_states(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_d.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c_d.nrows()
    }
}

/// Zero-order-hold discretization of `[B_c w_c]` driven by `[u; 1]`, computed
/// from the exponential of the block matrix `[[A_c, B_c, w_c], [0, 0, 0]] ts`.
pub fn discretize_zoh(ct: &CtModel, ts: f64) -> Result<DiscreteModel> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sampling period must be positive, got {ts}"
        )));
    }
    let nx = ct.n_states();
    let nu = ct.n_inputs();
    let dim = nx + nu + 1;
    let mut block = DMatrix::zeros(dim, dim);
    block.view_mut((0, 0), (nx, nx)).copy_from(&ct.a_c);
    block.view_mut((0, nx), (nx, nu)).copy_from(&ct.b_c);
    block.view_mut((0, nx + nu), (nx, 1)).copy_from(&ct.w_c);
    let phi = (block * ts).exp();
    Ok(DiscreteModel {
        a_d: phi.view((0, 0), (nx, nx)).into_owned(),
        b_d: phi.view((0, nx), (nx, nu)).into_owned(),
        w_d: phi.view((0, nx + nu), (nx, 1)).column(0).into_owned(),
        c_d: ct.c_c.clone(),
    })
}

/// Incremental model with state `[Δx_p; y]` and input `Δu`:
///
/// ```text
/// A = [[A_d, 0], [C_d A_d, I]],  B = [B_d; C_d B_d],  C = [0, I]
/// ```
///
/// The affine term of the plant drops out of the increments.
#[derive(Debug, Clone, PartialEq)]
pub struct DtAugModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub plant: DiscreteModel,
}

impl DtAugModel {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Augmented state from the current and previous plant states.
    pub fn state(&self, x_p: &DVector<f64>, x_p_prev: &DVector<f64>) -> Result<DVector<f64>> {
        let nxp = self.plant.n_states();
        check_len("plant state", nxp, x_p.len())?;
        check_len("previous plant state", nxp, x_p_prev.len())?;
        let y = &self.plant.c_d * x_p;
        let mut x = DVector::zeros(self.n_states());
        x.rows_mut(0, nxp).copy_from(&(x_p - x_p_prev));
        x.rows_mut(nxp, y.len()).copy_from(&y);
        Ok(x)
    }
}

pub fn augment(dt: &DiscreteModel) -> Result<DtAugModel> {
    let nxp = dt.n_states();
    let nu = dt.n_inputs();
    let ny = dt.n_outputs();
    check_len("A_d columns", nxp, dt.a_d.ncols())?;
    check_len("B_d rows", nxp, dt.b_d.nrows())?;
    check_len("C_d columns", nxp, dt.c_d.ncols())?;
    check_len("w_d length", nxp, dt.w_d.len())?;

    let nx = nxp + ny;
    let ca = &dt.c_d * &dt.a_d;
    let cb = &dt.c_d * &dt.b_d;
    let mut a = DMatrix::zeros(nx, nx);
    a.view_mut((0, 0), (nxp, nxp)).copy_from(&dt.a_d);
    a.view_mut((nxp, 0), (ny, nxp)).copy_from(&ca);
    a.view_mut((nxp, nxp), (ny, ny)).fill_with_identity();
    let mut b = DMatrix::zeros(nx, nu);
    b.view_mut((0, 0), (nxp, nu)).copy_from(&dt.b_d);
    b.view_mut((nxp, 0), (ny, nu)).copy_from(&cb);
    let mut c = DMatrix::zeros(ny, nx);
    c.view_mut((0, nxp), (ny, ny)).fill_with_identity();
    Ok(DtAugModel {
        a,
        b,
        c,
        plant: dt.clone(),
    })
}

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

use super::model::DtAugModel;

/// Luenberger gain for the augmented model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGain {
    l: DMatrix<f64>,
    spectral_radius: f64,
}

impl ObserverGain {
    /// Accepts `l` only if `A - L C` is Schur stable.
    pub fn new(l: DMatrix<f64>, aug: &DtAugModel) -> Result<Self> {
        check_len("observer gain rows", aug.n_states(), l.nrows())?;
        check_len("observer gain columns", aug.n_outputs(), l.ncols())?;
        let closed = &aug.a - &l * &aug.c;
        let spectral_radius = closed
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(spectral_radius < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observer error dynamics are not stable (spectral radius {spectral_radius})"
            )));
        }
        Ok(ObserverGain { l, spectral_radius })
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Spectral radius of `A - L C`.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }
}

/// `x̂⁺ = (A - L C) x̂ + B Δu + L y`.
pub fn observer_step(
    gain: &DMatrix<f64>,
    aug: &DtAugModel,
    x_hat: &DVector<f64>,
    du: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("observer gain rows", aug.n_states(), gain.nrows())?;
    check_len("observer gain columns", aug.n_outputs(), gain.ncols())?;
    check_len("estimate", aug.n_states(), x_hat.len())?;
    check_len("input increment", aug.n_inputs(), du.len())?;
    check_len("measurement", aug.n_outputs(), y.len())?;
    let innovation = y - &aug.c * x_hat;
    Ok(&aug.a * x_hat + &aug.b * du + gain * innovation)
}

//! The functional
//!
//! ```text
//! J_λ(ψ) = ½ ∫ <Dψ, ψ> - λ|ψ|²  -  ¼ ∫ (G * |ψ|²) |ψ|²
//! ```
//!
//! its L² gradient `Dψ - λψ - (G * |ψ|²)ψ`, and the `H^{-1/2}_λ` dual norm.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::SpinorField;
use crate::spectral::{GreenMode, Model};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub quadratic: f64,
    pub quartic: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(quadratic: f64, quartic: f64) -> Self {
        Self { quadratic, quartic, total: quadratic - quartic }
    }
}

pub fn energy_and_gradient(
    model: &Model,
    psi: &SpinorField,
    lambda: f64,
    mode: GreenMode,
) -> Result<(EnergyBreakdown, SpinorField)> {
    let dpsi = model.dirac_apply(psi);
    let rho = psi.density();
    let u = model.green_convolve(&rho, mode)?;
    let quadratic = 0.5 * (dpsi.l2_inner(psi)? - lambda * psi.l2_inner(psi)?);
    let quartic = 0.25 * u.integral_product(&rho);
    let mut grad = dpsi;
    grad.axpy(-lambda, psi);
    grad.axpy(-1.0, &psi.mul_scalar_field(&u));
    Ok((EnergyBreakdown::new(quadratic, quartic), grad))
}

pub fn energy(model: &Model, psi: &SpinorField, lambda: f64, mode: GreenMode) -> Result<EnergyBreakdown> {
    let dpsi = model.dirac_apply(psi);
    let rho = psi.density();
    let u = model.green_convolve(&rho, mode)?;
    let quadratic = 0.5 * (dpsi.l2_inner(psi)? - lambda * psi.l2_inner(psi)?);
    Ok(EnergyBreakdown::new(quadratic, 0.25 * u.integral_product(&rho)))
}

pub fn gradient(model: &Model, psi: &SpinorField, lambda: f64, mode: GreenMode) -> Result<SpinorField> {
    Ok(energy_and_gradient(model, psi, lambda, mode)?.1)
}

/// `|2J - <∇J, ψ> - 2·quartic|`, zero up to rounding.
pub fn identity_defect(model: &Model, psi: &SpinorField, lambda: f64, mode: GreenMode) -> Result<f64> {
    let (e, g) = energy_and_gradient(model, psi, lambda, mode)?;
    Ok((2.0 * e.total - g.l2_inner(psi)? - 2.0 * e.quartic).abs())
}

/// `‖|D - λ|^{-1/2} r‖_{L²}`.
pub fn dual_norm(model: &Model, r: &SpinorField, lambda: f64) -> Result<f64> {
    model.sobolev_seminorm(r, lambda, -0.5)
}

/// `‖ψ‖²_λ = <|D - λ| ψ, ψ>`.
pub fn lambda_norm_sq(model: &Model, psi: &SpinorField, lambda: f64) -> Result<f64> {
    let v = model.abs_power(psi, lambda, 1.0)?;
    v.l2_inner(psi)
}

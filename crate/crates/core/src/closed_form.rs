//! Bubble solutions, calibrated constants and grafted test spinors.
//!
//! With `f(r) = 1/(1+r²)`, the unit bubble `Ψ(x) = f^{n/2} (1 - x)·Φ₀`
//! satisfies `DΨ = n f Ψ` and `|Ψ|² = f^{n-1}`. The scaled family
//!
//! ```text
//! Ψ_σ(x) = A σ^{-(n-1)/2} (1 + |y|²)^{-n/2} (1 - y)·Φ₀,   y = (x - x₀)/σ
//! ```
//!
//! is the critical-order dilation of `A Ψ`, so its energy does not depend on σ.

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{LabError, Result};
use crate::grid::{ScalarDensity, SpinorField};
use crate::spectral::Model;

/// Fit region radius for the eigen-constant `d`.
pub const FIT_RADIUS: f64 = 1.0;
/// Largest accepted pointwise deviation of the `d` fit.
pub const FIT_LIMIT: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct BubbleParams {
    pub center: Vec<f64>,
    pub scale: f64,
    pub direction: Vec<Complex64>,
    pub amplitude: f64,
}

impl BubbleParams {
    /// Centred bubble with `Φ₀ = e₁`.
    pub fn centered(n: usize, spin_dim: usize, scale: f64, amplitude: f64) -> Self {
        let mut direction = vec![Complex64::new(0.0, 0.0); spin_dim];
        direction[0] = Complex64::new(1.0, 0.0);
        Self { center: vec![0.0; n], scale, direction, amplitude }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.center.len() != model.dim() {
            return Err(LabError::Shape { expected: model.dim(), got: self.center.len() });
        }
        if self.direction.len() != model.spin_dim() {
            return Err(LabError::Shape { expected: model.spin_dim(), got: self.direction.len() });
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(LabError::InvalidParameter(format!("bubble scale {} must be positive", self.scale)));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "bubble amplitude {} must be positive",
                self.amplitude
            )));
        }
        let norm: f64 = self.direction.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidParameter(format!("|Φ₀| = {norm} must be 1")));
        }
        Ok(())
    }
}

pub fn standard_bubble(model: &Model, params: &BubbleParams) -> Result<SpinorField> {
    params.validate(model)?;
    let n = model.dim();
    let cl = model.clifford();
    let sigma = params.scale;
    let pref = params.amplitude * sigma.powf(-0.5 * (n as f64 - 1.0));
    let mut y = vec![0.0; n];
    let mut yv = vec![Complex64::new(0.0, 0.0); model.spin_dim()];
    Ok(SpinorField::from_fn(*model.grid(), model.spin_dim(), |x, out| {
        for a in 0..n {
            y[a] = (x[a] - params.center[a]) / sigma;
        }
        let y2: f64 = y.iter().map(|v| v * v).sum();
        let s = pref * (1.0 + y2).powf(-0.5 * n as f64);
        cl.clifford_mul_into(&y, &params.direction, &mut yv);
        for (o, (p, q)) in out.iter_mut().zip(params.direction.iter().zip(&yv)) {
            *o = (p - q) * s;
        }
    }))
}

/// `f(x) = 1/(1 + |x|²)` on the grid.
pub fn conformal_factor(model: &Model) -> ScalarDensity {
    ScalarDensity::from_fn(*model.grid(), |x| 1.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>()))
}

/// Area of the unit sphere `S^{k}` embedded in `R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    let h = 0.5 * (k as f64 + 1.0);
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// `∫₀^∞ r^{n-1} (1+r²)^{-p} dr` via `r = tan θ`, which turns the integrand
/// into `sin^{n-1}θ cos^{2p-n-1}θ` on `[0, π/2]`.
pub fn radial_moment(n: usize, p: usize) -> f64 {
    assert!(2 * p > n, "moment diverges");
    let rule = GaussLegendre::new(64).expect("degree >= 2");
    let (a, b) = ((n - 1) as i32, (2 * p - n - 1) as i32);
    rule.integrate(0.0, std::f64::consts::FRAC_PI_2, |t| t.sin().powi(a) * t.cos().powi(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub n: usize,
    pub d: f64,
    pub a_n: f64,
    pub c_n: f64,
    #[serde(rename = "Ybar")]
    pub ybar: f64,
    #[serde(rename = "I_n")]
    pub i_n: f64,
    #[serde(rename = "QCoef")]
    pub q_coef: f64,
    pub fit_deviation: f64,
    pub consistency_residual: f64,
}

impl Constants {
    /// Constants from a given `d` (no fitting).
    pub fn from_d(n: usize, d: f64, fit_deviation: f64) -> Self {
        let nf = n as f64;
        let a_n = nf * d;
        let c_n = a_n.powf(nf - 2.0) / d.powf(nf - 1.0);
        let i_n = radial_moment(n, n);
        let q_int = radial_moment(n, n - 1);
        let omega = sphere_area(n - 1);
        let ybar = 0.25 * c_n.powf(1.0 / (nf - 1.0)) * a_n.powf(nf / (nf - 1.0)) * omega * i_n;
        let q_coef = a_n * omega * q_int;
        let consistency_residual = a_n.powf(nf / (nf - 1.0)) * sphere_area(n)
            - 2f64.powi(n as i32) * ybar * c_n.powf(-1.0 / (nf - 1.0));
        Self { n, d, a_n, c_n, ybar, i_n, q_coef, fit_deviation, consistency_residual }
    }

    /// Amplitude of the unit bubble solving the equation, `√aₙ`.
    pub fn bubble_amplitude(&self) -> f64 {
        self.a_n.sqrt()
    }
}

/// Result of the pointwise `d` fit.
#[derive(Clone, Debug)]
pub struct EigenFit {
    pub d: f64,
    pub deviation: f64,
    pub samples: usize,
}

/// Least-squares `d` in `(-Δ)^s f = d f^{n-1}` over `|x| ≤ FIT_RADIUS`.
pub fn fit_eigen_constant(model: &Model) -> Result<EigenFit> {
    let n = model.dim();
    if n < 3 {
        return Err(LabError::InvalidDimension(n, 3));
    }
    let f = conformal_factor(model);
    let lf = model.frac_laplacian_apply(&f, model.critical_order())?;
    let r2 = model.grid().radius_squared();
    let (mut num, mut den) = (0.0, 0.0);
    let mut pts = Vec::new();
    for ((&fv, &lv), &rr) in f.values().iter().zip(lf.values()).zip(&r2) {
        if rr <= FIT_RADIUS * FIT_RADIUS {
            let q = fv.powi(n as i32 - 1);
            num += lv * q;
            den += q * q;
            pts.push((lv, q));
        }
    }
    if pts.is_empty() {
        return Err(LabError::InvalidGrid("no grid points inside the fit region".into()));
    }
    let d = num / den;
    let deviation = pts.iter().map(|(l, q)| (l / (d * q) - 1.0).abs()).fold(0.0, f64::max);
    Ok(EigenFit { d, deviation, samples: pts.len() })
}

pub fn calibrate_constants(model: &Model) -> Result<Constants> {
    let fit = fit_eigen_constant(model)?;
    if fit.deviation > FIT_LIMIT {
        return Err(LabError::Calibration { deviation: fit.deviation, limit: FIT_LIMIT, d: fit.d });
    }
    Ok(Constants::from_d(model.dim(), fit.d, fit.deviation))
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, C^∞ in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Radial cutoff: 1 on `r ≤ δ`, 0 on `r ≥ 2δ`.
pub fn cutoff(r: f64, delta: f64) -> f64 {
    smooth_step((2.0 * delta - r) / delta)
}

/// `η(x) ε^{-(n-1)/2} Ψ(x/ε)` with `Ψ` the unit bubble of amplitude `amplitude`.
pub fn graft_test_spinor(model: &Model, eps: f64, cutoff_radius: f64, amplitude: f64) -> Result<SpinorField> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(LabError::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    if !(cutoff_radius > 0.0) || 2.0 * cutoff_radius >= 0.5 * model.grid().length() {
        return Err(LabError::InvalidParameter(format!(
            "cutoff radius {cutoff_radius} needs 0 < 2δ < L/2 = {}",
            0.5 * model.grid().length()
        )));
    }
    let params = BubbleParams::centered(model.dim(), model.spin_dim(), eps, amplitude);
    let psi = standard_bubble(model, &params)?;
    let eta = ScalarDensity::from_fn(*model.grid(), |x| {
        cutoff(x.iter().map(|v| v * v).sum::<f64>().sqrt(), cutoff_radius)
    });
    Ok(psi.mul_scalar_field(&eta))
}

pub fn q_of_eps(eps: f64, c: &Constants) -> f64 {
    eps * c.q_coef
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;

    #[test]
    fn moments_closed_form() {
        let pi = std::f64::consts::PI;
        assert!((radial_moment(3, 3) - pi / 16.0).abs() < 1e-14);
        assert!((radial_moment(3, 2) - pi / 4.0).abs() < 1e-14);
        assert!((radial_moment(4, 4) - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area(1) - 2.0 * pi).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * pi).abs() < 1e-13);
        assert!((sphere_area(3) - 2.0 * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn smooth_step_plateaus() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(cutoff(0.9, 1.0), 1.0);
        assert_eq!(cutoff(2.0, 1.0), 0.0);
    }

    #[test]
    fn q_linear() {
        let c = Constants::from_d(3, 2.0, 0.0);
        assert_eq!(q_of_eps(0.0, &c), 0.0);
        assert!((q_of_eps(0.6, &c) - 2.0 * q_of_eps(0.3, &c)).abs() < 1e-14);
    }

    #[test]
    fn invalid_bubble_params() {
        let md = Model::new(BoxGrid::new(3, 10.0, 8).unwrap()).unwrap();
        let mut p = BubbleParams::centered(3, 2, 1.0, 1.0);
        p.scale = 0.0;
        assert!(standard_bubble(&md, &p).is_err());
        let mut p = BubbleParams::centered(3, 2, 1.0, 1.0);
        p.direction[1] = Complex64::new(1.0, 0.0);
        assert!(standard_bubble(&md, &p).is_err());
        assert!(graft_test_spinor(&md, 1.0, 3.0, 1.0).is_err());
        assert!(graft_test_spinor(&md, 0.0, 1.0, 1.0).is_err());
    }
}

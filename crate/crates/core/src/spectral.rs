//! Fourier-multiplier operators on a box grid.
//!
//! The Dirac symbol is `A(ξ) = i Σ ξ_j Γ_j` with eigenvalues `±|ξ|`. Spinor
//! multipliers act branch-wise: a function `F` of the eigenvalue `e` acts as
//! `F(|ξ|) Π⁺ + F(-|ξ|) Π⁻`, and the zero mode has eigenvalue 0. Nyquist
//! modes (any axis index `m/2`) are outside the spinor field space and are
//! zeroed by every spinor multiplier.
//!
//! Scalar multipliers `|ξ|^p` are even, so they keep the Nyquist row.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::clifford::CliffordAlgebra;
use crate::error::{LabError, Result};
use crate::fft::{NdFft, PaddedRealFft};
use crate::grid::{BoxGrid, ScalarDensity, SpinorField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenMode {
    PeriodicMeanZero,
    FreeSpace,
}

impl std::str::FromStr for GreenMode {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic-mean-zero" | "periodic" => Ok(Self::PeriodicMeanZero),
            "free-space" | "free" => Ok(Self::FreeSpace),
            other => Err(LabError::InvalidParameter(format!("unknown green mode `{other}`"))),
        }
    }
}

/// How the singular kernel `1/r^2` is sampled on the padded grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelQuadrature {
    /// Smooth part sampled in real space, singular part added analytically in Fourier space.
    EwaldSplit,
    /// Point samples with the singular cell replaced by the exact cell average.
    CellAverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Closed form `Γ(n/2 - s) / (4^s π^{n/2} Γ(s))` of the Green constant for `(-Δ)^s`.
pub fn green_constant_exact(n: usize, two_s: f64) -> f64 {
    let s = 0.5 * two_s;
    let nh = 0.5 * n as f64;
    gamma(nh - s) / (4f64.powf(s) * std::f64::consts::PI.powf(nh) * gamma(s))
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelCalibration {
    pub constant: f64,
    pub gaussian_width: f64,
    pub exact: f64,
}

struct FreeSpaceGreen {
    pfft: PaddedRealFft,
    /// Half-complex spectrum of the unit-constant kernel, already scaled by `h^n`.
    hat: Vec<f64>,
    calibration: KernelCalibration,
}

impl FreeSpaceGreen {
    fn convolve_unit(&self, f: &[f64]) -> Vec<f64> {
        let mut spec = self.pfft.forward(f, self.pfft.full() / 2);
        for (z, k) in spec.iter_mut().zip(&self.hat) {
            *z *= *k;
        }
        self.pfft.inverse_corner(spec)
    }
}

/// Grid, Clifford representation and cached operators for one experiment.
pub struct Model {
    grid: BoxGrid,
    cliff: CliffordAlgebra,
    fft: NdFft,
    /// `|j|^2 -> number of non-Nyquist lattice points`.
    lattice: BTreeMap<u64, u64>,
    quadrature: KernelQuadrature,
    fixed_constant: Option<f64>,
    free: OnceLock<FreeSpaceGreen>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model").field("grid", &self.grid).field("quadrature", &self.quadrature).finish()
    }
}

impl Model {
    pub fn new(grid: BoxGrid) -> Result<Self> {
        Self::with_kernel(grid, KernelQuadrature::EwaldSplit, None)
    }

    /// `constant = None` calibrates the kernel constant on Gaussians.
    pub fn with_kernel(
        grid: BoxGrid,
        quadrature: KernelQuadrature,
        constant: Option<f64>,
    ) -> Result<Self> {
        let cliff = CliffordAlgebra::new(grid.dim())?;
        let fft = NdFft::new(grid.dim(), grid.points());
        let mut lattice = BTreeMap::new();
        let half = (grid.points() / 2) as i64;
        let mut idx = vec![-half + 1; grid.dim()];
        loop {
            let q: i64 = idx.iter().map(|j| j * j).sum();
            *lattice.entry(q as u64).or_insert(0) += 1;
            let mut a = grid.dim();
            loop {
                if a == 0 {
                    return Ok(Self {
                        grid,
                        cliff,
                        fft,
                        lattice,
                        quadrature,
                        fixed_constant: constant,
                        free: OnceLock::new(),
                    });
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < half {
                    break;
                }
                idx[a] = -half + 1;
            }
        }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn clifford(&self) -> &CliffordAlgebra {
        &self.cliff
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn spin_dim(&self) -> usize {
        self.cliff.spin_dim()
    }

    pub fn quadrature(&self) -> KernelQuadrature {
        self.quadrature
    }

    pub fn zeros(&self) -> SpinorField {
        SpinorField::zeros(self.grid, self.spin_dim())
    }

    fn check_field(&self, psi: &SpinorField) -> Result<()> {
        if *psi.grid() != self.grid || psi.spin_dim() != self.spin_dim() {
            return Err(LabError::GridMismatch);
        }
        Ok(())
    }

    /// Visit every Fourier mode with its frequency vector and Nyquist flag.
    fn for_each_mode(&self, mut f: impl FnMut(usize, &[f64], bool)) {
        let (n, m) = (self.grid.dim(), self.grid.points());
        let wave: Vec<f64> = (0..m).map(|i| self.grid.wave_number(i)).collect();
        let mut idx = vec![0usize; n];
        let mut xi = vec![0.0; n];
        for p in 0..self.grid.len() {
            let mut nyq = false;
            for a in 0..n {
                xi[a] = wave[idx[a]];
                nyq |= self.grid.is_nyquist_index(idx[a]);
            }
            f(p, &xi, nyq);
            let mut a = n;
            while a > 0 {
                a -= 1;
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    fn to_fourier(&self, psi: &SpinorField) -> Vec<Complex64> {
        let mut data = psi.values().to_vec();
        for chunk in data.chunks_mut(self.grid.len()) {
            self.fft.forward(chunk);
        }
        data
    }

    fn from_fourier(&self, mut data: Vec<Complex64>) -> SpinorField {
        for chunk in data.chunks_mut(self.grid.len()) {
            self.fft.inverse(chunk);
        }
        SpinorField::from_vec(self.grid, self.spin_dim(), data).expect("fourier buffer shape")
    }

    /// Apply `F(e)` branch-wise, `e ∈ {+|ξ|, -|ξ|, 0}`.
    pub fn branch_multiplier(&self, psi: &SpinorField, f: impl Fn(f64) -> f64) -> SpinorField {
        let nn = self.spin_dim();
        let len = self.grid.len();
        let mut data = self.to_fourier(psi);
        let mut v = vec![ZERO; nn];
        let mut av = vec![ZERO; nn];
        self.for_each_mode(|p, xi, nyq| {
            if nyq {
                for c in 0..nn {
                    data[c * len + p] = ZERO;
                }
                return;
            }
            let k = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if k == 0.0 {
                let s = f(0.0);
                for c in 0..nn {
                    data[c * len + p] *= s;
                }
                return;
            }
            let (fp, fm) = (f(k), f(-k));
            let a = 0.5 * (fp + fm);
            let b = 0.5 * (fp - fm) / k;
            for c in 0..nn {
                v[c] = data[c * len + p];
            }
            self.cliff.symbol_apply(xi, &v, &mut av);
            for c in 0..nn {
                data[c * len + p] = v[c] * a + av[c] * b;
            }
        });
        self.from_fourier(data)
    }

    pub fn dirac_apply(&self, psi: &SpinorField) -> SpinorField {
        let nn = self.spin_dim();
        let len = self.grid.len();
        let mut data = self.to_fourier(psi);
        let mut v = vec![ZERO; nn];
        let mut av = vec![ZERO; nn];
        self.for_each_mode(|p, xi, nyq| {
            for c in 0..nn {
                v[c] = data[c * len + p];
            }
            if nyq {
                av.iter_mut().for_each(|z| *z = ZERO);
            } else {
                self.cliff.symbol_apply(xi, &v, &mut av);
            }
            for c in 0..nn {
                data[c * len + p] = av[c];
            }
        });
        self.from_fourier(data)
    }

    /// `-Δ` on spinors (Nyquist removed, so it equals `D²` exactly).
    pub fn laplacian_spinor(&self, psi: &SpinorField) -> SpinorField {
        self.branch_multiplier(psi, |e| e * e)
    }

    /// Remove Nyquist content.
    pub fn band_limit(&self, psi: &SpinorField) -> SpinorField {
        self.branch_multiplier(psi, |_| 1.0)
    }

    pub fn check_off_spectrum(&self, lambda: f64) -> Result<()> {
        let fund = self.grid.fundamental();
        let tol = 1e-10 * lambda.abs().max(1.0);
        if lambda.abs() <= tol {
            return Err(LabError::OnSpectrum { lambda, eigenvalue: 0.0 });
        }
        let q = (lambda / fund).powi(2);
        let lo = q.floor() as u64;
        for key in [lo, lo + 1] {
            if key > 0 && self.lattice.contains_key(&key) {
                let e = fund * (key as f64).sqrt();
                if (e - lambda.abs()).abs() <= tol {
                    return Err(LabError::OnSpectrum { lambda, eigenvalue: e.copysign(lambda) });
                }
            }
        }
        Ok(())
    }

    /// `P^±_λ`: keeps the modes whose eigenvalue minus λ has the given sign.
    pub fn spectral_project(&self, psi: &SpinorField, lambda: f64, sign: Branch) -> Result<SpinorField> {
        self.check_field(psi)?;
        self.check_off_spectrum(lambda)?;
        Ok(match sign {
            Branch::Plus => self.branch_multiplier(psi, |e| if e > lambda { 1.0 } else { 0.0 }),
            Branch::Minus => self.branch_multiplier(psi, |e| if e < lambda { 1.0 } else { 0.0 }),
        })
    }

    /// `|D - λ|^p ψ`.
    pub fn abs_power(&self, psi: &SpinorField, lambda: f64, power: f64) -> Result<SpinorField> {
        self.check_field(psi)?;
        if power < 0.0 {
            self.check_off_spectrum(lambda)?;
        }
        Ok(self.branch_multiplier(psi, |e| (e - lambda).abs().powf(power)))
    }

    /// `‖|D - λ|^p ψ‖_{L²}` over the band-limited part of ψ.
    pub fn sobolev_seminorm(&self, psi: &SpinorField, lambda: f64, power: f64) -> Result<f64> {
        Ok(self.abs_power(psi, lambda, power)?.l2_norm())
    }

    /// Sorted `(eigenvalue, multiplicity)` pairs of the discrete Dirac operator.
    pub fn dirac_spectrum(&self) -> Vec<(f64, u64)> {
        let fund = self.grid.fundamental();
        let half = (self.spin_dim() / 2) as u64;
        let mut out = Vec::with_capacity(2 * self.lattice.len());
        for (&q, &count) in self.lattice.iter().rev() {
            if q > 0 {
                out.push((-fund * (q as f64).sqrt(), count * half));
            }
        }
        out.push((0.0, self.spin_dim() as u64));
        for (&q, &count) in self.lattice.iter() {
            if q > 0 {
                out.push((fund * (q as f64).sqrt(), count * half));
            }
        }
        out
    }

    fn scalar_multiplier(&self, f: &ScalarDensity, mult: impl Fn(f64) -> f64) -> ScalarDensity {
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut data);
        self.for_each_mode(|p, xi, _| {
            let k = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            data[p] *= mult(k);
        });
        self.fft.inverse(&mut data);
        ScalarDensity::from_vec(self.grid, data.into_iter().map(|z| z.re).collect())
            .expect("scalar buffer shape")
    }

    /// `(-Δ)^{two_s / 2}` as the multiplier `|ξ|^{two_s}`.
    pub fn frac_laplacian_apply(&self, f: &ScalarDensity, two_s: f64) -> Result<ScalarDensity> {
        if !(two_s > 0.0) {
            return Err(LabError::InvalidParameter(format!("order 2s = {two_s} must be positive")));
        }
        Ok(self.scalar_multiplier(f, |k| if k == 0.0 { 0.0 } else { k.powf(two_s) }))
    }

    /// Critical order `2s = n - 2`.
    pub fn critical_order(&self) -> f64 {
        self.dim() as f64 - 2.0
    }

    /// Green convolution; the second value is the mean of `f` discarded in
    /// periodic mode (always 0 in free-space mode).
    pub fn green_convolve_report(&self, f: &ScalarDensity, mode: GreenMode) -> Result<(ScalarDensity, f64)> {
        if f.grid() != &self.grid {
            return Err(LabError::GridMismatch);
        }
        let two_s = self.critical_order();
        if !(two_s > 0.0) {
            return Err(LabError::InvalidDimension(self.dim(), 3));
        }
        match mode {
            GreenMode::PeriodicMeanZero => {
                let out = self.scalar_multiplier(f, |k| if k == 0.0 { 0.0 } else { k.powf(-two_s) });
                Ok((out, f.mean()))
            }
            GreenMode::FreeSpace => {
                let g = self.free_space()?;
                let mut out = g.convolve_unit(f.values());
                let c = g.calibration.constant;
                out.iter_mut().for_each(|v| *v *= c);
                Ok((ScalarDensity::from_vec(self.grid, out)?, 0.0))
            }
        }
    }

    pub fn green_convolve(&self, f: &ScalarDensity, mode: GreenMode) -> Result<ScalarDensity> {
        Ok(self.green_convolve_report(f, mode)?.0)
    }

    /// Calibrated constant of the free-space kernel `c / r^{n-2s}`.
    pub fn kernel_calibration(&self) -> Result<KernelCalibration> {
        Ok(self.free_space()?.calibration.clone())
    }

    /// Smallest eigenvalue of the padded free-space kernel (should be ≥ 0).
    pub fn kernel_spectrum_min(&self) -> Result<f64> {
        let g = self.free_space()?;
        Ok(g.hat.iter().cloned().fold(f64::INFINITY, f64::min) * g.calibration.constant)
    }

    fn free_space(&self) -> Result<&FreeSpaceGreen> {
        if self.dim() < 3 {
            return Err(LabError::InvalidDimension(self.dim(), 3));
        }
        if let Some(g) = self.free.get() {
            return Ok(g);
        }
        let g = self.build_free_space();
        Ok(self.free.get_or_init(|| g))
    }

    fn build_free_space(&self) -> FreeSpaceGreen {
        let (n, m, h) = (self.dim(), self.grid.points(), self.grid.spacing());
        let pfft = PaddedRealFft::new(n, m);
        let mm = pfft.full();
        let kernel = match self.quadrature {
            KernelQuadrature::EwaldSplit => {
                let sigma = 4.0 * h;
                sample_padded(n, mm, h, |r2| {
                    if r2 == 0.0 {
                        1.0 / (sigma * sigma)
                    } else {
                        -(-r2 / (sigma * sigma)).exp_m1() / r2
                    }
                })
            }
            KernelQuadrature::CellAverage => {
                let centre = cell_average_inverse_square(n) / (h * h);
                sample_padded(n, mm, h, |r2| if r2 == 0.0 { centre } else { 1.0 / r2 })
            }
        };
        let spec = pfft.forward(&kernel, mm);
        drop(kernel);
        let vol = self.grid.cell_volume();
        let mut hat: Vec<f64> = spec.iter().map(|z| z.re * vol).collect();
        drop(spec);
        if self.quadrature == KernelQuadrature::EwaldSplit {
            let sigma = 4.0 * h;
            let a = 0.5 * n as f64 - 1.0;
            let pi_n = std::f64::consts::PI.powf(0.5 * n as f64);
            let dk = 2.0 * std::f64::consts::PI / (mm as f64 * h);
            let at_zero = pi_n * sigma.powf(n as f64 - 2.0) / a;
            let mut idx = vec![0i64; n];
            for (i, v) in hat.iter_mut().enumerate() {
                pfft.wave_index(i, &mut idx);
                let k2 = idx.iter().map(|j| (j * j) as f64).sum::<f64>() * dk * dk;
                *v += if k2 == 0.0 {
                    at_zero
                } else {
                    pi_n * (4.0 / k2).powf(a) * gamma(a) * gamma_lr(a, 0.25 * k2 * sigma * sigma)
                };
            }
        }
        let mut g = FreeSpaceGreen {
            pfft,
            hat,
            calibration: KernelCalibration {
                constant: 1.0,
                gaussian_width: 0.0,
                exact: green_constant_exact(n, self.critical_order()),
            },
        };
        let (constant, width) = match self.fixed_constant {
            Some(c) => (c, 0.0),
            None => self.calibrate_kernel(&g),
        };
        g.calibration.constant = constant;
        g.calibration.gaussian_width = width;
        debug!(
            "free-space kernel constant {constant:.10} (closed form {:.10})",
            g.calibration.exact
        );
        g
    }

    /// Least-squares `c` with `(-Δ)^s (c K * g) ≈ g` for a centred Gaussian `g`.
    fn calibrate_kernel(&self, g: &FreeSpaceGreen) -> (f64, f64) {
        let width = (self.grid.length() / 16.0).max(4.0 * self.grid.spacing());
        let gauss = ScalarDensity::from_fn(self.grid, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / (width * width)).exp()
        });
        let u = ScalarDensity::from_vec(self.grid, g.convolve_unit(gauss.values())).expect("shape");
        let lu = self
            .frac_laplacian_apply(&u, self.critical_order())
            .expect("positive order");
        (gauss.integral_product(&gauss) / lu.integral_product(&gauss), width)
    }

    /// Impulse response of the periodic Green operator at the box centre:
    /// returns `(minimum within radius, number of negative samples within radius)`.
    pub fn periodic_green_positivity(&self, radius: f64) -> Result<(f64, usize)> {
        let len = self.grid.len();
        let mut delta = vec![0.0; len];
        let m = self.grid.points();
        let centre: usize = (0..self.dim()).fold(0, |acc, _| acc * m + m / 2);
        delta[centre] = 1.0 / self.grid.cell_volume();
        let f = ScalarDensity::from_vec(self.grid, delta)?;
        let u = self.green_convolve(&f, GreenMode::PeriodicMeanZero)?;
        let r2 = self.grid.radius_squared();
        let mut min = f64::INFINITY;
        let mut neg = 0;
        for (v, rr) in u.values().iter().zip(&r2) {
            if *rr <= radius * radius {
                min = min.min(*v);
                if *v < 0.0 {
                    neg += 1;
                }
            }
        }
        if neg > 0 {
            warn!("periodic Green function negative at {neg} points within r <= {radius} (min {min:.3e})");
        }
        Ok((min, neg))
    }
}

/// Sample a radial function of `r^2` on the `(mm)^n` padded grid at minimum-image distances.
fn sample_padded(n: usize, mm: usize, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let d2: Vec<f64> = (0..mm)
        .map(|i| {
            let j = if i < mm / 2 { i as f64 } else { i as f64 - mm as f64 };
            (j * h) * (j * h)
        })
        .collect();
    let total = mm.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        out.push(f(idx.iter().map(|&i| d2[i]).sum()));
        let mut a = n;
        while a > 0 {
            a -= 1;
            idx[a] += 1;
            if idx[a] < mm {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Average of `|x|^{-2}` over the unit cube `[-1/2, 1/2]^n`, via the divergence
/// theorem reduced to one face: `n/(n-2) ∫_{[-1/2,1/2]^{n-1}} (|y|^2 + 1/4)^{-1} dy`.
pub fn cell_average_inverse_square(n: usize) -> f64 {
    let rule = GaussLegendre::new(40).expect("degree >= 2");
    fn nest(rule: &GaussLegendre, depth: usize, acc: f64) -> f64 {
        if depth == 0 {
            return 1.0 / (acc + 0.25);
        }
        rule.integrate(-0.5, 0.5, |y| nest(rule, depth - 1, acc + y * y))
    }
    n as f64 / (n as f64 - 2.0) * nest(&rule, n - 1, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: usize, l: f64, m: usize) -> Model {
        Model::new(BoxGrid::new(n, l, m).unwrap()).unwrap()
    }

    #[test]
    fn constant_spinor_in_kernel() {
        let md = model(3, 10.0, 8);
        let s = [Complex64::new(1.0, 0.5), Complex64::new(-0.3, 2.0)];
        let psi = SpinorField::constant(*md.grid(), &s);
        assert!(md.dirac_apply(&psi).l2_norm() < 1e-12);
    }

    #[test]
    fn spectrum_basics() {
        let md = model(3, 10.0, 8);
        let spec = md.dirac_spectrum();
        let zero = spec.iter().find(|(e, _)| *e == 0.0).unwrap();
        assert_eq!(zero.1, 2);
        let first = spec.iter().find(|(e, _)| *e > 0.0).unwrap();
        assert!((first.0 - 2.0 * std::f64::consts::PI / 10.0).abs() < 1e-14);
        assert_eq!(first.1, 6);
        let total: u64 = spec.iter().map(|x| x.1).sum();
        assert_eq!(total, 7u64.pow(3) * 2);
        assert!(spec.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn on_spectrum_rejected() {
        let md = model(3, 10.0, 8);
        let l1 = md.grid().fundamental();
        assert!(md.check_off_spectrum(l1).is_err());
        assert!(md.check_off_spectrum(-l1).is_err());
        assert!(md.check_off_spectrum(0.0).is_err());
        assert!(md.check_off_spectrum(l1 * 2f64.sqrt()).is_err());
        assert!(md.check_off_spectrum(0.5 * l1).is_ok());
        assert!(md.check_off_spectrum(1.2 * l1).is_ok());
    }

    #[test]
    fn cell_average_known_values() {
        // midpoint sum on a fine subdivision of the unit cube (singularity is integrable)
        let k = 120;
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let c = |t: usize| (t as f64 + 0.5) / k as f64 - 0.5;
                    s += 1.0 / (c(i).powi(2) + c(j).powi(2) + c(l).powi(2));
                }
            }
        }
        let mid = s / (k * k * k) as f64;
        let k3 = cell_average_inverse_square(3);
        assert!((k3 / mid - 1.0).abs() < 1e-2, "{k3} vs {mid}");
    }

    #[test]
    fn exact_constants() {
        let pi = std::f64::consts::PI;
        assert!((green_constant_exact(3, 1.0) - 1.0 / (2.0 * pi * pi)).abs() < 1e-14);
        assert!((green_constant_exact(4, 2.0) - 1.0 / (4.0 * pi * pi)).abs() < 1e-14);
    }
}

//! Periodic box grids and the fields that live on them.
//!
//! Points are `x_i = (i - m/2) h` per axis, stored row-major with the last
//! axis fastest. Spinor fields are stored component-major: component `c`
//! occupies `data[c * len .. (c + 1) * len]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    n: usize,
    length: f64,
    points: usize,
}

impl BoxGrid {
    pub fn new(n: usize, length: f64, points: usize) -> Result<Self> {
        if n < 1 {
            return Err(LabError::InvalidDimension(n, 1));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(LabError::InvalidGrid(format!("box length {length} must be positive")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(LabError::InvalidGrid(format!(
                "points per axis {points} must be even and >= 8"
            )));
        }
        Ok(Self { n, length, points })
    }

    /// Default grids used by the experiments.
    pub fn default_for(n: usize) -> Result<Self> {
        match n {
            3 => Self::new(3, 30.0, 96),
            4 => Self::new(4, 16.0, 32),
            _ => Self::new(n, 16.0, 32),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64) * self.spacing()
    }

    /// Angular wave number of FFT index `i` along one axis.
    pub fn wave_number(&self, i: usize) -> f64 {
        let k = if i < self.points / 2 { i as f64 } else { i as f64 - self.points as f64 };
        2.0 * std::f64::consts::PI * k / self.length
    }

    /// Smallest nonzero wave number `2π/L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn is_nyquist_index(&self, i: usize) -> bool {
        i == self.points / 2
    }

    pub fn multi_index(&self, mut p: usize, out: &mut [usize]) {
        for a in (0..self.n).rev() {
            out[a] = p % self.points;
            p /= self.points;
        }
    }

    pub fn position(&self, p: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.n];
        self.multi_index(p, &mut idx);
        for (o, &i) in out.iter_mut().zip(&idx) {
            *o = self.coord(i);
        }
    }

    /// All grid positions, `n` coordinates per point.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len() * self.n];
        for (p, chunk) in out.chunks_mut(self.n).enumerate() {
            self.position(p, chunk);
        }
        out
    }

    /// `|x|^2` at every grid point.
    pub fn radius_squared(&self) -> Vec<f64> {
        self.positions().chunks(self.n).map(|x| x.iter().map(|v| v * v).sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarDensity {
    grid: BoxGrid,
    data: Vec<f64>,
}

impl ScalarDensity {
    pub fn zeros(grid: BoxGrid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn from_vec(grid: BoxGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(LabError::Shape { expected: grid.len(), got: data.len() });
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let data = grid.positions().chunks(grid.dim()).map(f).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `h^n Σ f g`.
    pub fn integral_product(&self, other: &Self) -> f64 {
        self.grid.cell_volume() * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    grid: BoxGrid,
    spin_dim: usize,
    data: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: BoxGrid, spin_dim: usize) -> Self {
        Self { grid, spin_dim, data: vec![Complex64::new(0.0, 0.0); grid.len() * spin_dim] }
    }

    pub fn from_vec(grid: BoxGrid, spin_dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() * spin_dim {
            return Err(LabError::Shape { expected: grid.len() * spin_dim, got: data.len() });
        }
        Ok(Self { grid, spin_dim, data })
    }

    /// Build from a pointwise closure writing the local spinor.
    pub fn from_fn(grid: BoxGrid, spin_dim: usize, mut f: impl FnMut(&[f64], &mut [Complex64])) -> Self {
        let len = grid.len();
        let mut out = Self::zeros(grid, spin_dim);
        let mut x = vec![0.0; grid.dim()];
        let mut s = vec![Complex64::new(0.0, 0.0); spin_dim];
        for p in 0..len {
            grid.position(p, &mut x);
            s.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            f(&x, &mut s);
            for c in 0..spin_dim {
                out.data[c * len + p] = s[c];
            }
        }
        out
    }

    /// Constant spinor `s` everywhere.
    pub fn constant(grid: BoxGrid, s: &[Complex64]) -> Self {
        Self::from_fn(grid, s.len(), |_, out| out.copy_from_slice(s))
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    pub fn at(&self, p: usize) -> Vec<Complex64> {
        let len = self.grid.len();
        (0..self.spin_dim).map(|c| self.data[c * len + p]).collect()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.spin_dim != other.spin_dim {
            return Err(LabError::GridMismatch);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert!(self.check(x).is_ok(), "axpy on mismatched fields");
        self.data.iter_mut().zip(&x.data).for_each(|(y, v)| *y += v * a);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `Re ∫ <a, b>` with weight `h^n`.
    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        self.check(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Self) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        s * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner_unchecked(self).sqrt()
    }

    /// `|ψ|^2` pointwise.
    pub fn density(&self) -> ScalarDensity {
        let len = self.grid.len();
        let mut out = vec![0.0; len];
        for c in 0..self.spin_dim {
            for (o, z) in out.iter_mut().zip(&self.data[c * len..(c + 1) * len]) {
                *o += z.norm_sqr();
            }
        }
        ScalarDensity { grid: self.grid, data: out }
    }

    /// Multiply pointwise by a real scalar field.
    pub fn mul_scalar_field(&self, f: &ScalarDensity) -> Self {
        let len = self.grid.len();
        let mut out = self.clone();
        for c in 0..self.spin_dim {
            for (z, v) in out.data[c * len..(c + 1) * len].iter_mut().zip(&f.data) {
                *z *= *v;
            }
        }
        out
    }
}

pub fn pointwise_density(psi: &SpinorField) -> ScalarDensity {
    psi.density()
}

pub fn l2_inner(a: &SpinorField, b: &SpinorField) -> Result<f64> {
    a.l2_inner(b)
}

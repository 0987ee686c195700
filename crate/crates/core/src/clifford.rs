//! Complex Clifford algebra representations of R^n.
//!
//! Generators satisfy `Γ_i Γ_j + Γ_j Γ_i = -2 δ_ij I` and are anti-Hermitian.
//! Built recursively: n = 2 uses `{iσx, iσy}`, n = 3 adds `iσz`, and
//! n -> n + 2 maps `Γ_k -> Γ_k ⊗ σx` and appends `iI ⊗ σy`, `iI ⊗ σz`.
//!
//! For odd n this fixes the representation in which the volume element
//! `Γ_1 Γ_2 ... Γ_n` equals `+I` (n = 3) or its tensor lift.

use num_complex::Complex64;

use crate::error::{LabError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    size: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, data: vec![ZERO; size * size] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m.data[i * size + i] = ONE;
        }
        m
    }

    pub fn from_rows(size: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), size * size);
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.size + c]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { size: self.size, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { size: self.size, data }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.size;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.size;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.size, other.size);
        let n = a * b;
        let mut out = Self::zeros(n);
        for i in 0..a {
            for j in 0..a {
                let x = self.data[i * a + j];
                for k in 0..b {
                    for l in 0..b {
                        out.data[(i * b + k) * n + j * b + l] = x * other.data[k * b + l];
                    }
                }
            }
        }
        out
    }

    /// Max-entry norm of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * v[j]).sum())
            .collect()
    }
}

fn pauli() -> [CMatrix; 3] {
    let sx = CMatrix::from_rows(2, vec![ZERO, ONE, ONE, ZERO]);
    let sy = CMatrix::from_rows(2, vec![ZERO, -I, I, ZERO]);
    let sz = CMatrix::from_rows(2, vec![ONE, ZERO, ZERO, -ONE]);
    [sx, sy, sz]
}

/// One nonzero entry per row: `(Γ v)[r] = phase[r] * v[col[r]]`.
#[derive(Clone, Debug)]
struct Monomial {
    col: Vec<usize>,
    phase: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct CliffordAlgebra {
    dim: usize,
    spin_dim: usize,
    gammas: Vec<CMatrix>,
    mono: Vec<Monomial>,
}

pub fn build_clifford(n: usize) -> Result<CliffordAlgebra> {
    CliffordAlgebra::new(n)
}

impl CliffordAlgebra {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(LabError::InvalidDimension(n, 2));
        }
        let [sx, sy, sz] = pauli();
        let mut gammas = if n % 2 == 0 {
            vec![sx.scale(I), sy.scale(I)]
        } else {
            vec![sx.scale(I), sy.scale(I), sz.scale(I)]
        };
        while gammas.len() < n {
            let id = CMatrix::identity(gammas[0].size());
            let mut next: Vec<CMatrix> = gammas.iter().map(|g| g.kron(&sx)).collect();
            next.push(id.kron(&sy).scale(I));
            next.push(id.kron(&sz).scale(I));
            gammas = next;
        }
        let spin_dim = 1usize << (n / 2);
        debug_assert_eq!(gammas[0].size(), spin_dim);
        let mono = gammas.iter().map(monomial_of).collect();
        Ok(Self { dim: n, spin_dim, gammas, mono })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn gammas(&self) -> &[CMatrix] {
        &self.gammas
    }

    pub fn gamma(&self, j: usize) -> &CMatrix {
        &self.gammas[j]
    }

    /// `(Σ v_i Γ_i) s`.
    pub fn clifford_mul(&self, v: &[f64], s: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim {
            return Err(LabError::Shape { expected: self.dim, got: v.len() });
        }
        if s.len() != self.spin_dim {
            return Err(LabError::Shape { expected: self.spin_dim, got: s.len() });
        }
        let mut out = vec![ZERO; self.spin_dim];
        self.clifford_mul_into(v, s, &mut out);
        Ok(out)
    }

    /// Unchecked `out = (Σ v_i Γ_i) s`.
    #[inline]
    pub fn clifford_mul_into(&self, v: &[f64], s: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for (j, m) in self.mono.iter().enumerate() {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for r in 0..self.spin_dim {
                out[r] += m.phase[r] * s[m.col[r]] * vj;
            }
        }
    }

    /// Dirac symbol `A(ξ) = i Σ ξ_j Γ_j` as a dense Hermitian matrix.
    pub fn symbol(&self, xi: &[f64]) -> CMatrix {
        let mut a = CMatrix::zeros(self.spin_dim);
        for (j, g) in self.gammas.iter().enumerate() {
            a = a.add(&g.scale(I * xi[j]));
        }
        a
    }

    /// Unchecked `out = A(ξ) s`.
    #[inline]
    pub fn symbol_apply(&self, xi: &[f64], s: &[Complex64], out: &mut [Complex64]) {
        self.clifford_mul_into(xi, s, out);
        out.iter_mut().for_each(|z| *z *= I);
    }
}

fn monomial_of(g: &CMatrix) -> Monomial {
    let n = g.size();
    let mut col = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    for r in 0..n {
        let nz: Vec<usize> = (0..n).filter(|&c| g.get(r, c) != ZERO).collect();
        assert_eq!(nz.len(), 1, "generator is not monomial");
        col.push(nz[0]);
        phase.push(g.get(r, nz[0]));
    }
    Monomial { col, phase }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_dimension() {
        assert!(matches!(build_clifford(1), Err(LabError::InvalidDimension(1, 2))));
        assert!(build_clifford(0).is_err());
    }

    #[test]
    fn spinor_dimension() {
        for (n, big_n) in [(2, 2), (3, 2), (4, 4), (5, 4), (6, 8), (7, 8)] {
            assert_eq!(build_clifford(n).unwrap().spin_dim(), big_n);
        }
    }

    #[test]
    fn volume_element_n3() {
        let c = build_clifford(3).unwrap();
        let vol = c.gamma(0).mul(c.gamma(1)).mul(c.gamma(2));
        assert!(vol.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn deterministic() {
        let a = build_clifford(5).unwrap();
        let b = build_clifford(5).unwrap();
        assert_eq!(a.gammas(), b.gammas());
    }

    #[test]
    fn monomial_apply_matches_dense() {
        let c = build_clifford(5).unwrap();
        let s: Vec<Complex64> =
            (0..4).map(|k| Complex64::new(k as f64 + 0.5, 1.0 - k as f64)).collect();
        let v = [0.3, -1.2, 0.7, 2.0, -0.1];
        let fast = c.clifford_mul(&v, &s).unwrap();
        let mut dense = CMatrix::zeros(4);
        for (j, g) in c.gammas().iter().enumerate() {
            dense = dense.add(&g.scale(Complex64::new(v[j], 0.0)));
        }
        let slow = dense.apply(&s);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn shape_errors() {
        let c = build_clifford(3).unwrap();
        assert!(c.clifford_mul(&[1.0, 0.0], &[ONE, ZERO]).is_err());
        assert!(c.clifford_mul(&[1.0, 0.0, 0.0], &[ONE]).is_err());
    }
}

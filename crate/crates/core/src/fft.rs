//! Multi-dimensional FFTs on row-major cubic arrays.
//!
//! `NdFft` transforms complex `m^n` arrays in place (unnormalised forward,
//! `1/m^n` on the inverse). `PaddedRealFft` handles real data embedded in
//! the corner of a `(2m)^n` zero-padded array, skipping lines that are
//! known to be zero and only producing the corner on the way back.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const TILE: usize = 32;

/// FFT every length-`len` column of a `[rows = len][cols]` block, in place.
fn columns(fft: &dyn Fft<f64>, block: &mut [Complex64], len: usize, cols: usize) {
    let mut buf = vec![ZERO; len * TILE.min(cols)];
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    let mut c0 = 0;
    while c0 < cols {
        let w = TILE.min(cols - c0);
        for r in 0..len {
            let row = &block[r * cols + c0..r * cols + c0 + w];
            for (t, z) in row.iter().enumerate() {
                buf[t * len + r] = *z;
            }
        }
        fft.process_with_scratch(&mut buf[..w * len], &mut scratch);
        for r in 0..len {
            let row = &mut block[r * cols + c0..r * cols + c0 + w];
            for (t, z) in row.iter_mut().enumerate() {
                *z = buf[t * len + r];
            }
        }
        c0 += w;
    }
}

#[derive(Clone)]
pub struct NdFft {
    dim: usize,
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NdFft({}^{})", self.size, self.dim)
    }
}

impl NdFft {
    pub fn new(dim: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            size,
            fwd: planner.plan_fft_forward(size),
            inv: planner.plan_fft_inverse(size),
        }
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&*self.fwd, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&*self.inv, data);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        let m = self.size;
        for axis in 0..self.dim {
            let inner = m.pow((self.dim - 1 - axis) as u32);
            if inner == 1 {
                data.par_chunks_mut(m * 64).for_each(|chunk| {
                    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
                    fft.process_with_scratch(chunk, &mut scratch);
                });
            } else {
                data.par_chunks_mut(m * inner).for_each(|block| columns(fft, block, m, inner));
            }
        }
    }
}

/// Real FFTs on the `(2m)^n` grid for data supported in `[0, m)^n`.
///
/// The spectrum is stored half-complex along the last axis:
/// shape `[M; n-1] x (M/2 + 1)` with `M = 2m`.
#[derive(Clone)]
pub struct PaddedRealFft {
    dim: usize,
    live: usize,
    full: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PaddedRealFft {
    pub fn new(dim: usize, live: usize) -> Self {
        let full = 2 * live;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::new();
        Self {
            dim,
            live,
            full,
            r2c: rp.plan_fft_forward(full),
            c2r: rp.plan_fft_inverse(full),
            fwd: cp.plan_fft_forward(full),
            inv: cp.plan_fft_inverse(full),
        }
    }

    pub fn full(&self) -> usize {
        self.full
    }

    pub fn half(&self) -> usize {
        self.full / 2 + 1
    }

    pub fn spectrum_len(&self) -> usize {
        self.full.pow(self.dim as u32 - 1) * self.half()
    }

    fn stride(&self, axis: usize) -> usize {
        self.full.pow((self.dim - 2 - axis) as u32) * self.half()
    }

    /// Offsets of the outer blocks whose leading `lead` indices are all `< extent`.
    fn block_offsets(&self, lead: usize, extent: usize) -> Vec<usize> {
        let mut offs = vec![0usize];
        for k in 0..lead {
            let s = self.stride(k);
            offs = offs.iter().flat_map(|&o| (0..extent).map(move |i| o + i * s)).collect();
        }
        offs
    }

    /// Forward transform of an `extent^n` real array placed in the corner.
    /// `extent` is either `m` (data) or `2m` (kernels).
    pub fn forward(&self, input: &[f64], extent: usize) -> Vec<Complex64> {
        assert!(extent == self.live || extent == self.full);
        assert_eq!(input.len(), extent.pow(self.dim as u32));
        let (mm, hh) = (self.full, self.half());
        let mut out = vec![ZERO; self.spectrum_len()];
        let lines = self.block_offsets(self.dim - 1, extent);
        let mut line = vec![0.0; mm];
        let mut spec = vec![ZERO; hh];
        let mut scratch = self.r2c.make_scratch_vec();
        for (li, &off) in lines.iter().enumerate() {
            line[..extent].copy_from_slice(&input[li * extent..(li + 1) * extent]);
            line[extent..].iter_mut().for_each(|x| *x = 0.0);
            self.r2c
                .process_with_scratch(&mut line, &mut spec, &mut scratch)
                .expect("r2c length");
            out[off..off + hh].copy_from_slice(&spec);
        }
        for axis in (0..self.dim - 1).rev() {
            let inner = self.stride(axis);
            for off in self.block_offsets(axis, extent) {
                columns(&*self.fwd, &mut out[off..off + mm * inner], mm, inner);
            }
        }
        out
    }

    /// Inverse transform returning only the `[0, m)^n` corner, normalised.
    pub fn inverse_corner(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let (mm, hh, m) = (self.full, self.half(), self.live);
        for axis in 0..self.dim - 1 {
            let inner = self.stride(axis);
            for off in self.block_offsets(axis, m) {
                columns(&*self.inv, &mut spec[off..off + mm * inner], mm, inner);
            }
        }
        let lines = self.block_offsets(self.dim - 1, m);
        let norm = 1.0 / (mm as f64).powi(self.dim as i32);
        let mut out = vec![0.0; m.pow(self.dim as u32)];
        let mut buf = vec![ZERO; hh];
        let mut line = vec![0.0; mm];
        let mut scratch = self.c2r.make_scratch_vec();
        for (li, &off) in lines.iter().enumerate() {
            buf.copy_from_slice(&spec[off..off + hh]);
            buf[0].im = 0.0;
            buf[hh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut buf, &mut line, &mut scratch)
                .expect("c2r length");
            for (o, v) in out[li * m..(li + 1) * m].iter_mut().zip(&line[..m]) {
                *o = v * norm;
            }
        }
        out
    }

    /// Signed integer wave numbers of spectrum entry `idx`.
    pub fn wave_index(&self, mut idx: usize, out: &mut [i64]) {
        let hh = self.half();
        let mm = self.full as i64;
        out[self.dim - 1] = (idx % hh) as i64;
        idx /= hh;
        for a in (0..self.dim - 1).rev() {
            let i = (idx % self.full) as i64;
            idx /= self.full;
            out[a] = if i < mm / 2 { i } else { i - mm };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dim: usize, m: usize) -> Vec<Complex64> {
        let len = m.pow(dim as u32);
        let idx = |mut p: usize| {
            let mut v = vec![0usize; dim];
            for a in (0..dim).rev() {
                v[a] = p % m;
                p /= m;
            }
            v
        };
        (0..len)
            .map(|k| {
                let kv = idx(k);
                (0..len)
                    .map(|p| {
                        let pv = idx(p);
                        let dot: usize = kv.iter().zip(&pv).map(|(a, b)| a * b).sum();
                        let ph = -2.0 * std::f64::consts::PI * (dot % m) as f64 / m as f64;
                        data[p] * Complex64::from_polar(1.0, ph)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_3d() {
        let m = 6;
        let data: Vec<Complex64> = (0..m * m * m)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        NdFft::new(3, m).forward(&mut fast);
        let slow = naive_dft(&data, 3, m);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let f = NdFft::new(4, 8);
        let data: Vec<Complex64> =
            (0..f.len()).map(|i| Complex64::new((i as f64).sin(), 0.5 * (i as f64).cos())).collect();
        let mut w = data.clone();
        f.forward(&mut w);
        f.inverse(&mut w);
        for (a, b) in w.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn padded_matches_dense_convolution() {
        // corner of a cyclic convolution on the padded grid against direct summation
        let (dim, m) = (2, 6);
        let p = PaddedRealFft::new(dim, m);
        let mm = p.full();
        let f: Vec<f64> = (0..m * m).map(|i| ((i * 7 % 11) as f64) - 3.0).collect();
        let ker: Vec<f64> = (0..mm * mm)
            .map(|i| {
                let (a, b) = ((i / mm) as i64, (i % mm) as i64);
                let a = if a < mm as i64 / 2 { a } else { a - mm as i64 };
                let b = if b < mm as i64 / 2 { b } else { b - mm as i64 };
                1.0 / (1.0 + (a * a + b * b) as f64)
            })
            .collect();
        let fh = p.forward(&f, m);
        let kh = p.forward(&ker, mm);
        let prod: Vec<Complex64> = fh.iter().zip(&kh).map(|(a, b)| a * b).collect();
        let conv = p.inverse_corner(prod);
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for k in 0..m {
                    for l in 0..m {
                        let di = (i as i64 - k as i64) as f64;
                        let dj = (j as i64 - l as i64) as f64;
                        s += f[k * m + l] / (1.0 + di * di + dj * dj);
                    }
                }
                assert!((conv[i * m + j] - s).abs() < 1e-11, "{} vs {}", conv[i * m + j], s);
            }
        }
    }
}

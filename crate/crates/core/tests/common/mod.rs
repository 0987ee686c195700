#![allow(dead_code)]

use dirac_lab::{BoxGrid, Model, ScalarDensity, SpinorField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(n: usize, length: f64, points: usize) -> Model {
    Model::new(BoxGrid::new(n, length, points).unwrap()).unwrap()
}

/// Uniform noise with the Nyquist planes removed.
pub fn random_spinor(model: &Model, rng: &mut ChaCha8Rng, amplitude: f64) -> SpinorField {
    let grid = *model.grid();
    let data = (0..grid.len() * model.spin_dim())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amplitude)
        .collect();
    model.band_limit(&SpinorField::from_vec(grid, model.spin_dim(), data).unwrap())
}

/// Noise times a Gaussian envelope, so the field sits well inside the box.
pub fn localized_spinor(model: &Model, rng: &mut ChaCha8Rng, amplitude: f64, width: f64) -> SpinorField {
    let noise = random_spinor(model, rng, amplitude);
    let r2 = model.grid().radius_squared();
    let env = ScalarDensity::from_vec(*model.grid(), r2.iter().map(|r| (-r / (width * width)).exp()).collect()).unwrap();
    model.band_limit(&noise.mul_scalar_field(&env))
}

pub fn random_scalar(model: &Model, rng: &mut ChaCha8Rng) -> ScalarDensity {
    let grid = *model.grid();
    ScalarDensity::from_vec(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

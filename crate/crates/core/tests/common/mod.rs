#![allow(dead_code)]

use brls::experiments::generators::{gaussian_matrix, gaussian_vector};
use brls::experiments::{random_noise_matrix, NoiseShape};
use brls::{BrlsInstance, FeasibleSet, Matrix, ResidualMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Affine instance `F(x) = Ax + b0` on `[−1, 1]^m` with noise of the given class.
pub fn affine_instance(
    shape: NoiseShape,
    m: usize,
    n: usize,
    r: usize,
    c_scale: f64,
    rng: &mut ChaCha8Rng,
) -> BrlsInstance<f64> {
    let a = gaussian_matrix(r, m, 0.5, rng);
    let b0 = gaussian_vector(r, 0.5, rng);
    let c = random_noise_matrix(shape, r, n, c_scale, rng).unwrap();
    BrlsInstance::new(
        ResidualMap::affine(a, b0).unwrap(),
        c,
        FeasibleSet::cube(m, -1.0, 1.0).unwrap(),
    )
    .unwrap()
}

pub fn point_in_cube(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

pub fn mask_to_y(mask: usize, n: usize) -> Vec<bool> {
    (0..n).map(|j| mask >> j & 1 == 1).collect()
}

pub fn column_scaled(c: &Matrix<f64>, s: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(c.rows(), c.cols(), |i, j| c.get(i, j) * s[j])
}

//! Shared generators for the property suites.
#![allow(dead_code)]

use hamrecon::examples::haar_unitary;
use hamrecon::state::{validate_density, DensityMatrix};
use hamrecon::{Complex64, ComplexMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .hermitian_part()
        .scale_real(scale)
}

/// Random weights summing to one, sorted descending.
pub fn random_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// `V diag(spectrum) V^H` with Haar `V`.
pub fn density_with_spectrum(spectrum: &[f64], rng: &mut ChaCha8Rng) -> DensityMatrix {
    let v = haar_unitary(spectrum.len(), rng);
    let m = &(&v * &ComplexMatrix::from_real_diagonal(spectrum)) * &v.adjoint();
    validate_density(&m.hermitian_part(), 1e-10).expect("conjugated spectrum is a state")
}

//! Seeded random generation. Every stochastic routine takes an explicit
//! seed; independent streams of one seed are used for trials and restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{DenseTensor, Matrix};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn randn(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn randn_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| randn(rng))
}

pub fn randn_tensor(shape: &[usize], rng: &mut Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| randn(rng))
}

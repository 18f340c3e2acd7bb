//! Deterministic fan-in-scaled Gaussian initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::tensor::Tensor;

/// Weights ~ N(0, 2 / fan_in); the stream is fully determined by `seed`.
pub fn he_normal(shape: &[usize], fan_in: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("valid std");
    let data = (0..shape.iter().product::<usize>())
        .map(|_| normal.sample(&mut rng))
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

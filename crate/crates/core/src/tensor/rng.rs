use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{Matrix, Real};

/// Seeded generator: ChaCha8 keyed by `seed_from_u64(seed)`. ChaCha output
/// is defined byte-for-byte, so a seed yields the same stream everywhere.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// Half-width of the uniform weight-initialization interval.
pub const WEIGHT_INIT_BOUND: f64 = 0.1;

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent generator for a sub-task, keyed by `(seed, stream)`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Rng::new(splitmix64(seed ^ splitmix64(stream)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.random_range(lo..hi)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform_matrix<T: Real>(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<T> {
        let data = (0..rows * cols).map(|_| T::of(self.uniform(lo, hi))).collect();
        Matrix::from_raw(rows, cols, data)
    }

    pub fn standard_normal_matrix<T: Real>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        let data = (0..rows * cols)
            .map(|_| T::of(self.standard_normal()))
            .collect();
        Matrix::from_raw(rows, cols, data)
    }

    /// Weight matrix drawn uniformly from `[-0.1, 0.1)`.
    pub fn init_weights<T: Real>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        self.uniform_matrix(rows, cols, -WEIGHT_INIT_BOUND, WEIGHT_INIT_BOUND)
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut self.inner);
        p
    }

    pub fn index(&mut self, upper: usize) -> usize {
        self.inner.random_range(0..upper)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

//! Seedable random streams.
//!
//! Every stochastic operation in this crate takes an explicit stream, and
//! parallel work gets independently derived streams, so experiments replay
//! bit-identically. Streams wrap ChaCha8 keyed either directly from a seed or
//! from a `(root seed, path)` derivation, which is how paired Monte Carlo
//! trials guarantee that every detector sees the same channel, symbols, and
//! noise for a given trial index.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::FRAC_1_SQRT_2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A seedable, splittable stream of random values.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent stream from a root seed and a path of indices.
    ///
    /// The same `(root, path)` always yields the same stream; distinct paths
    /// yield statistically independent streams.
    pub fn derive(root: u64, path: &[u64]) -> Self {
        let mut state = splitmix64(root);
        for &p in path {
            state = splitmix64(state ^ splitmix64(p));
        }
        Self::from_seed(state)
    }

    /// Split off a child stream, advancing this one.
    pub fn split(&mut self) -> Self {
        Self::from_seed(self.rng.gen())
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Circularly symmetric complex Gaussian with unit total variance:
    /// E|z|^2 = 1, i.e. variance 1/2 per real component.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        Complex64::new(
            self.normal() * FRAC_1_SQRT_2,
            self.normal() * FRAC_1_SQRT_2,
        )
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

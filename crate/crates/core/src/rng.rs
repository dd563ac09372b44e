//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`]. Independent
//! streams are derived from a single `u64` seed by the splitting rule
//! `stream(seed, i) = ChaCha8Rng::seed_from_u64(seed)` with `set_stream(i)`,
//! so work split into fixed chunks gives identical results regardless of how
//! many threads execute it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type RandomSource = ChaCha8Rng;

pub fn seeded(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, index: u64) -> RandomSource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One draw of `N_C(0, 1)`: real and imaginary parts each have variance 1/2.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

//! Seeding and stream splitting.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`], a counter-based
//! generator keyed by a 64-bit seed. A realization seed is expanded into one
//! independent ChaCha stream per user (`set_stream`), so the draws of user
//! `i` never depend on how many other users exist or in which order workers
//! consume them. Child seeds for Monte Carlo trials are derived from a master
//! seed with [`derive_seed`], a SplitMix64 chain over a tag path.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Stream index offset separating EVE substreams from LU substreams.
pub const EVE_STREAM_OFFSET: u64 = 1 << 32;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of tags.
///
/// Distinct paths of equal length give distinct seeds with overwhelming
/// probability; the mapping is a pure function.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &tag| {
        splitmix64(acc ^ splitmix64(tag.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Opens substream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws from CN(0, variance): independent real and imaginary parts with
/// variance `variance / 2` each.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scale = variance.sqrt() * FRAC_1_SQRT_2;
    Complex64::new(re * scale, im * scale)
}

/// Uniform draw on `[lo, hi)`; returns `lo` when the interval is empty.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

//! Counter-based random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream selected by
//! `(seed, domain, index)`: the seed and a domain label are hashed into the
//! cipher key, the index becomes the ChaCha stream id. A sample therefore
//! sees the same numbers whether it is processed first, last, or on another
//! thread.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Factory of independent, index-addressable random streams.
#[derive(Clone, Debug)]
pub struct StreamFactory {
    key: [u8; 32],
}

impl StreamFactory {
    pub fn new(seed: u64, domain: &str) -> Self {
        let mut state = splitmix64(seed ^ fnv1a(domain.as_bytes()));
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Seed of the `index`-th sample of a batch, recorded alongside the sample
/// so it can be regenerated in isolation.
pub fn sample_seed(seed: u64, domain: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(domain.as_bytes())) ^ splitmix64(index.wrapping_add(1)))
}

/// Standard complex Gaussian: independent real and imaginary parts of
/// variance 1/2, so `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Maps fixed-size index chunks in parallel and returns the results in chunk
/// order. Chunk boundaries depend only on `chunk`, never on the worker count,
/// so any subsequent sequential fold is bit-reproducible.
pub fn ordered_chunks<T, F>(total: u64, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    assert!(chunk > 0);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            f(lo..(lo + chunk).min(total))
        })
        .collect()
}

//! Deterministic random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. Work items own their stream, so results do not
//! depend on how rayon schedules them or on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Output indices handled by one stream in chunked generators.
pub const CHUNK: usize = 1024;

/// Stream domains. Distinct purposes never share a stream.
pub mod domain {
    pub const FORMULA: u64 = 1;
    pub const TRUNCATED: u64 = 2;
    pub const EXTINCT: u64 = 3;
    pub const SURVIVING: u64 = 4;
    pub const SURVIVAL_POOL: u64 = 5;
    pub const LL: u64 = 6;
    pub const DE: u64 = 7;
    pub const TREES: u64 = 8;
    pub const NOISE: u64 = 9;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed; used to give each iteration of a loop its own seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}

/// Computes `f(i, rng_i)` for `i in 0..n` in parallel; output order is by index.
pub fn par_map_streams<T, F>(n: usize, seed: u64, domain: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, domain, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Fills `out` in fixed chunks of [`CHUNK`] elements, one stream per chunk.
pub fn par_fill_chunked<T, F>(out: &mut [T], seed: u64, domain: u64, f: F)
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync + Send,
{
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = stream(seed, domain, c as u64);
            for slot in chunk.iter_mut() {
                *slot = f(&mut rng);
            }
        });
}

/// Poisson sampler that also accepts a zero mean.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Pois(Option<Poisson<f64>>);

impl Pois {
    pub(crate) fn new(mean: f64) -> Self {
        Pois(if mean > 0.0 {
            Some(Poisson::new(mean).expect("finite positive mean"))
        } else {
            None
        })
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> usize {
        self.0.map_or(0, |p| p.sample(rng) as usize)
    }

    /// Conditioned on a positive value, by rejection.
    pub(crate) fn sample_positive(&self, rng: &mut impl Rng) -> usize {
        assert!(self.0.is_some(), "zero mean cannot be conditioned positive");
        loop {
            let k = self.sample(rng);
            if k > 0 {
                return k;
            }
        }
    }
}

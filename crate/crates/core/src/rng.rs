//! Deterministic random streams keyed by `(seed, stream_id)`.
//!
//! Every chain and every purpose inside a chain draws from its own stream, so
//! results do not depend on thread scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A counter-based random stream. Identical `(seed, stream_id)` pairs yield
/// identical sequences.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    /// Opens stream `stream_id` of the generator keyed by `seed`.
    pub fn fork(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`. `p <= 0` never fires and `p >= 1` always does.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Stream purposes, combined with a chain index into a stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 0,
    Kernel = 1,
    Denoise = 2,
    Data = 3,
    Noise = 4,
    Shuffle = 5,
    Audit = 6,
}

/// Stream id for `(index, purpose)`. Indices up to `2^56` are supported.
pub fn stream_id(index: u64, purpose: Purpose) -> u64 {
    (index << 8) | purpose as u64
}

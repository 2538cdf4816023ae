//! Seeded, splittable random streams and chunked parallel execution.
//!
//! Every stream is a ChaCha20 keystream. The 256-bit key is the little-endian
//! seed followed by 24 zero bytes and the 64-bit stream selector is the stream
//! index, so `(seed, index)` names the same sequence on every platform.
//!
//! Monte Carlo work is cut into fixed-size chunks. Chunk `c` of a job in
//! domain `d` draws from stream `(d << 40) | c`, so a job's output depends on
//! the seed alone and never on how many workers ran it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

/// Identifier recorded in every report that depends on random draws.
pub const RNG_ALGORITHM: &str = "chacha20-le64seed-stream/v1";

/// Samples handled by one chunk (and one stream) in parallel jobs.
pub const CHUNK_SIZE: u64 = 1 << 16;

const DOMAIN_SHIFT: u32 = 40;

/// A single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha20Rng,
    seed: u64,
    index: u64,
}

/// Opens stream `index` of `seed`.
pub fn stream_from_seed(seed: u64, index: u64) -> RngStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut inner = ChaCha20Rng::from_seed(key);
    inner.set_stream(index);
    RngStream { inner, seed, index }
}

impl RngStream {
    pub fn algorithm_id(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.index
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits of one draw.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair coin.
    pub fn bit(&mut self) -> bool {
        self.inner.next_u64() >> 63 == 1
    }

    /// Borrow as a `rand` generator for distribution sampling and shuffles.
    pub fn as_rng(&mut self) -> &mut impl Rng {
        &mut self.inner
    }
}

/// Stream index for chunk `chunk` of a job in `domain`.
pub fn chunk_stream_index(domain: u64, chunk: u64) -> u64 {
    debug_assert!(chunk < 1 << DOMAIN_SHIFT);
    (domain << DOMAIN_SHIFT) | chunk
}

/// Runs `n` trials split into [`CHUNK_SIZE`] chunks on the current rayon pool.
///
/// `per_chunk(stream, start, count)` handles trials `start..start + count`
/// with its own stream; the per-chunk results are folded in chunk order with
/// `combine`, starting from `init`. Integer tallies keep the result independent of scheduling.
pub fn run_chunked<T, F, C>(n: u64, seed: u64, domain: u64, init: T, per_chunk: F, combine: C) -> T
where
    T: Send,
    F: Fn(&mut RngStream, u64, u64) -> T + Sync,
    C: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let partials: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_SIZE;
            let count = CHUNK_SIZE.min(n - start);
            let mut stream = stream_from_seed(seed, chunk_stream_index(domain, c));
            per_chunk(&mut stream, start, count)
        })
        .collect();
    partials.into_iter().fold(init, combine)
}

/// Draws `n` bits with exactly `n / 2` ones (plus one fair extra bit when
/// `n` is odd) in uniformly random order.
pub fn balanced_bits(n: usize, rng: &mut RngStream) -> Vec<bool> {
    use rand::seq::SliceRandom;
    let mut bits: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
    if n % 2 == 1 {
        bits[n - 1] = rng.bit();
    }
    bits.shuffle(rng.as_rng());
    bits
}

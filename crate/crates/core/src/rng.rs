//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 substream
//! addressed by `(seed, stream)`. Work is split into fixed-size chunks, each
//! chunk owning its own substream, so results do not depend on how many
//! worker threads evaluate the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// Stream domains. The upper bits of a stream id select the domain, the
/// lower 40 bits the replicate or chunk index.
pub mod domain {
    pub const SERIES: u64 = 0;
    pub const LIMIT: u64 = 1;
    pub const CENTERING: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const TAIL: u64 = 4;
    pub const GARCH: u64 = 5;
    pub const CLUSTER: u64 = 6;
    pub const DIAGNOSTIC: u64 = 7;
    pub const STATIONARITY: u64 = 8;
    pub const METRIC: u64 = 9;
}

const INDEX_BITS: u32 = 40;

/// Default number of draws handled by one chunk in chunked Monte Carlo loops.
pub const CHUNK: usize = 1 << 14;

pub fn stream_id(domain: u64, index: u64) -> u64 {
    debug_assert!(index < (1 << INDEX_BITS));
    (domain << INDEX_BITS) | index
}

/// Independent generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn domain_stream(seed: u64, domain: u64, index: u64) -> SimRng {
    substream(seed, stream_id(domain, index))
}

/// Runs `total` draws split into chunks of at most `chunk` draws. Chunk `k`
/// gets substream `(seed, domain, k)`; outputs come back in chunk order.
pub fn chunked<T, F>(total: usize, chunk: usize, seed: u64, domain: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|k| {
            let len = chunk.min(total - k * chunk);
            let mut rng = domain_stream(seed, domain, k as u64);
            work(&mut rng, len)
        })
        .collect()
}

/// Uniform draw on (0, 1], safe for `u.powf(-1/alpha)`.
#[inline]
pub fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

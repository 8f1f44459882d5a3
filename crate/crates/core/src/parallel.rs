//! Seeded RNG streams and an order-preserving parallel map.
//!
//! Every unit of work draws from its own ChaCha stream keyed by
//! `(master seed, tag, index)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Stream tags for the independent task families.
pub mod tag {
    pub const KNOT: u64 = 1;
    pub const TILE: u64 = 2;
    pub const PLUGIN: u64 = 3;
    pub const LATENT: u64 = 4;
    pub const PARAMS: u64 = 5;
    pub const SIMULATE: u64 = 6;
    pub const REPLICATE: u64 = 7;
    pub const FISHER: u64 = 8;
}

/// Independent generator for task `index` of family `tag`.
pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"mosaic\0\0");
    ChaCha8Rng::from_seed(key)
}

/// Derived 64-bit seed, for handing a whole sub-run its own master seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream_rng(seed, tag, index).next_u64()
}

/// Worker count to use; `0` means all available cores.
pub fn resolve_workers(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        workers
    }
}

/// `(0..n).map(f)` evaluated on `workers` threads, results in index order.
pub fn parallel_map<T, F>(workers: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let workers = resolve_workers(workers);
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

//! Counter-based random streams.
//!
//! Every replicate, bootstrap draw or chunk gets its own generator derived
//! from a root seed and a path of counters, so results never depend on how
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of counters.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &c| mix(acc ^ mix(c)))
}

/// Generator for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generator addressed by a path of counters below `seed`.
pub fn stream_at(seed: u64, path: &[u64]) -> ChaCha8Rng {
    match path.split_last() {
        Some((&last, prefix)) => stream(derive_seed(seed, prefix), last),
        None => ChaCha8Rng::seed_from_u64(seed),
    }
}

//! Seed splitting.
//!
//! Every random stream in the crate is derived from a master seed through
//! [`derive_seed`], so results depend only on `(config, master_seed)` and never
//! on which worker thread happened to execute a task.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used for every simulation stream.
pub type SimRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix(master, index)`: the seed of task `index` under `master`.
#[inline]
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_mul(GOLDEN).wrapping_add(1)))
}

/// Folds a path of task indices into a seed: `derive_seed(m, &[r, i]) = mix(mix(m, r), i)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &i| mix(acc, i))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

//! Seeded randomness shared by every stochastic step (splits, init, minibatches).
//!
//! All randomness flows through [`Xoshiro256PlusPlus`] seeded with
//! `seed_from_u64`, which expands the seed with SplitMix64. The shuffle is a
//! plain Fisher–Yates pass with `j = next_u64() % (i + 1)`, so a split can be
//! reproduced by any implementation that follows [`PRNG_ID`].

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Identifier written into every artifact that depends on the generator.
pub const PRNG_ID: &str = "xoshiro256++/splitmix64-seed/fisher-yates-mod/v1";

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// In-place Fisher–Yates shuffle, walking from the last element down.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// A uniformly shuffled permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, rng);
    idx
}

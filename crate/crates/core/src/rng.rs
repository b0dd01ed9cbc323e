//! Counter-based random streams.
//!
//! A [`StreamFamily`] is a ChaCha8 key derived from `(seed, domain)`. Each
//! Monte Carlo path `i` draws from stream `i` of that key, so a path's
//! randomness never depends on how paths are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG type handed to every sampling routine.
pub type PathRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamFamily {
    seed: u64,
    key: [u8; 32],
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl StreamFamily {
    /// Family for `seed` within a named domain. Distinct domains give
    /// unrelated keys for the same seed.
    pub fn new(seed: u64, domain: &str) -> Self {
        let mut state = seed ^ fnv1a(domain.as_bytes()).rotate_left(17);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-family, e.g. one per replication of a study.
    pub fn child(&self, index: u64) -> Self {
        let mut state = fnv1a(&self.key) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self {
            seed: self.seed,
            key,
        }
    }

    /// Stream `index` of this family, positioned at its first word.
    pub fn stream(&self, index: u64) -> PathRng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Seed for sub-run `index` of a study seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
    splitmix64(&mut state)
}

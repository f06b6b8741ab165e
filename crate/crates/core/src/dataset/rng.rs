//! Pinned pseudo-random stream for dataset operations.
//!
//! All seeded dataset decisions draw from ChaCha20 (20 rounds, RFC 7539 block
//! function as implemented by `rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`, consuming one `next_u64` word per draw.
//! Bounded integers use rejection sampling below the largest multiple of the
//! bound, so the stream, and therefore every split, is identical on every
//! platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct DatasetRng(ChaCha20Rng);

impl DatasetRng {
    pub fn new(seed: u64) -> Self {
        DatasetRng(ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Fisher–Yates from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

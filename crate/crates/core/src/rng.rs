//! Named, counter-indexed random streams derived from a single seed.
//!
//! Every random decision in the crate draws from a stream identified by a
//! `(label, index)` pair, so results depend only on the seed and never on
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    seed: u64,
}

impl SeedStreams {
    pub fn new(seed: u64) -> Self {
        SeedStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for the stream `(label, index)`.
    pub fn stream(&self, label: &str, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ fnv1a(label)));
        rng.set_stream(index);
        rng
    }

    /// Child family for nested work such as one Monte Carlo replication.
    pub fn child(&self, label: &str, index: u64) -> SeedStreams {
        SeedStreams { seed: splitmix(splitmix(self.seed ^ fnv1a(label)) ^ splitmix(index.wrapping_add(0x9e37_79b9))) }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Seeded, stream-separated randomness.
//!
//! Every random draw in the crate flows from an [`RngSeed`]. A seed names a
//! ChaCha8 key and the stream id selects one of its 2^64 independent
//! keystreams, so `(seed, stream)` pairs never overlap. Replications and
//! parallel blocks derive child seeds through [`RngSeed::child`], which keeps
//! results independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Well-known stream ids used inside a single test invocation.
pub mod streams {
    pub const DATA: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const ARTIFICIAL_TREATMENT: u64 = 2;
    pub const NULL_SIMULATION: u64 = 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed::new(20_180_521)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        RngSeed { stream, ..self }
    }

    /// Seed for the `index`-th child task (replication, draw block, ...).
    /// Children share the parent's stream id but use a remixed key.
    pub fn child(self, index: u64) -> Self {
        let mixed = splitmix64(self.seed ^ splitmix64(index.wrapping_add(1)));
        RngSeed {
            seed: mixed,
            stream: self.stream,
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// `count` independent standard normal draws.
pub fn standard_normal_stream(seed: RngSeed, count: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    StandardNormal.sample_iter(&mut rng).take(count).collect()
}

//! Counter-based generator for exploratory (non-budgeted) Monte Carlo.
//!
//! Sample `i` under key `k` is drawn from the ChaCha8 keystream seeded by `k`
//! with stream id `i`, so any sample can be regenerated independently of
//! the others and parallel evaluation is reproducible. This never touches
//! the budgeted [`BitStream`](crate::randbits::BitStream).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::special::inverse_normal_cdf;

pub struct KeyedNormals {
    rng: ChaCha8Rng,
}

impl KeyedNormals {
    pub fn new(key: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        Self { rng }
    }

    /// A uniform in `(0, 1)` on the midpoint grid of `2^53` cells.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (-53f64).exp2()
    }

    pub fn next_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_uniform())
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.next_normal()).collect()
    }
}

//! Deterministic replica streams.
//!
//! Every stochastic run is driven by a ChaCha8 generator keyed by the master
//! seed, with the replica index selecting an independent stream. Distinct
//! replica indices therefore never share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplicaSeed {
    pub master: u64,
    pub replica: u64,
}

impl ReplicaSeed {
    pub fn new(master: u64, replica: u64) -> Self {
        Self { master, replica }
    }

    /// Seed for a two-level index such as (lattice size index, replica).
    pub fn nested(master: u64, group: u32, replica: u32) -> Self {
        Self::new(master, (u64::from(group) << 32) | u64::from(replica))
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replica);
        rng
    }
}

/// Exponential waiting time with the given total rate.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

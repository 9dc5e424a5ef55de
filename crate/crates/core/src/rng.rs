//! Deterministic, splittable random streams.
//!
//! Every stochastic routine takes either an explicit generator or a [`SeedStream`]
//! from which independent child generators are derived by label and index. Child
//! streams depend only on `(root seed, label, index)`, never on call order, so
//! parallel and sequential runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream for `(label, index)`.
    pub fn child(&self, label: &str, index: u64) -> SeedStream {
        let mixed = splitmix64(self.seed ^ splitmix64(fnv1a(label) ^ splitmix64(index)));
        SeedStream { seed: mixed }
    }

    pub fn rng(&self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn rng_for(&self, label: &str, index: u64) -> Rng {
        self.child(label, index).rng()
    }
}

//! Named random substreams.
//!
//! Every stochastic component draws from a [`Stream`] derived from one root
//! seed by a path of labels and indices, e.g. `root / "sim" / dialog 17 /
//! step 3 / "duration"`. Adding a new field or consumer therefore never
//! shifts the draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(splitmix(seed ^ 0x5851_F42D_4C95_7F2D))
    }

    /// Substream identified by a label.
    pub fn child(self, label: &str) -> Self {
        Stream(splitmix(self.0.rotate_left(23) ^ fnv1a(label.as_bytes())))
    }

    /// Substream identified by an index (dialog number, step, episode...).
    pub fn index(self, i: u64) -> Self {
        Stream(splitmix(
            self.0.rotate_left(41) ^ splitmix(i.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

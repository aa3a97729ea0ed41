//! Counter-based random streams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream keyed by the
//! master seed and a [`Purpose`], and selected by a `(client, round)` stream
//! id. Distinct `(purpose, client, round)` triples never share keystream, so
//! results do not depend on the order in which clients are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Each purpose gets its own key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    CheckIn = 1,
    BatchPlan = 2,
    Noise = 3,
    ServerSample = 4,
    Partition = 5,
    HoldOut = 6,
}

/// Identifies one substream: a client in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StreamId {
    pub client: u32,
    pub round: u32,
}

impl StreamId {
    pub fn new(client: usize, round: usize) -> Self {
        Self {
            client: u32::try_from(client).expect("client id exceeds u32"),
            round: u32::try_from(round).expect("round exceeds u32"),
        }
    }

    fn packed(self) -> u64 {
        (u64::from(self.client) << 32) | u64::from(self.round)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the generator for `(seed, purpose, id)`.
pub fn stream(seed: u64, purpose: Purpose, id: StreamId) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(id.packed());
    rng
}

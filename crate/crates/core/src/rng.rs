//! Deterministic random streams.
//!
//! Every consumer draws from ChaCha8 keyed by the run seed, with the stream
//! number derived from a purpose tag and coordinates such as
//! `(relation, snapshot)`. Streams are independent of call order, so work can
//! be split across threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different consumers apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    SynthStructure = 1,
    SynthFeatures = 2,
    Split = 3,
    TrainNegatives = 4,
    ValNegatives = 5,
    TestNegatives = 6,
}

// splitmix64 finalizer
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn stream(seed: u64, purpose: Purpose, coords: &[u64]) -> ChaCha8Rng {
    let mut id = mix(purpose as u64);
    for &c in coords {
        id = mix(id ^ c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

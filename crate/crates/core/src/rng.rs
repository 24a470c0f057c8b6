//! Named, independent random streams derived from a single experiment seed.
//!
//! Every source of randomness in a run is one of these streams, so two
//! strategies trained from the same seed see identical initial weights and
//! identical batch order regardless of how much randomness the perturbations
//! themselves consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Init,
    Shuffle,
    Perturb,
    EvalCorrupt,
    Data,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x696e_6974,
            Stream::Shuffle => 0x7368_7566,
            Stream::Perturb => 0x7065_7274,
            Stream::EvalCorrupt => 0x6576_616c,
            Stream::Data => 0x6461_7461,
        }
    }
}

/// SplitMix64 finalizer; platform independent.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root stream for `seed`.
pub fn stream(seed: u64, which: Stream) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(which.tag())))
}

/// Counter-based sub-stream: the same `(seed, which, counter)` always yields
/// the same generator, independent of evaluation order.
pub fn substream(seed: u64, which: Stream, counter: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed ^ mix64(which.tag())) ^ mix64(counter)))
}

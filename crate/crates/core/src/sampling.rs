//! Version-stable primitives on top of a raw `RngCore` stream.
//!
//! Sender and receiver reconstruct bin partitions from a shared seed, so the
//! mapping from generator output to integers and reals is spelled out here
//! rather than delegated to `rand`'s distribution code.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Codec random source: ChaCha20 with a 64-bit seed.
pub type CodecRng = ChaCha20Rng;

pub fn codec_rng(seed: u64) -> CodecRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Uniform real in `[0, 1)` with 53 bits of resolution.
pub fn unit_interval<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, bound)` by rejection on the top of the `u64` range.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: u64) -> u64 {
    assert!(bound > 0, "empty range");
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

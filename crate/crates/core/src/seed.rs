//! Platform-stable seed derivation.
//!
//! `std`'s hashers are not guaranteed stable across releases, so every derived
//! seed in the crate goes through these functions instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One round of the splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over raw bytes.
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derives a child seed from a parent seed and a stream index.
pub fn derive(parent: u64, stream: u64) -> u64 {
    mix64(parent ^ mix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Derives a seed from a parent seed, a string key and a counter.
pub fn derive_keyed(parent: u64, key: &str, counter: u64) -> u64 {
    derive(derive(parent, hash_bytes(key.as_bytes())), counter)
}

/// The generator used throughout the crate; ChaCha8 output is specified
/// independently of platform and word size.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

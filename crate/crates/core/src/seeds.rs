//! Deterministic seed derivation for independent random streams.

/// Derives a child seed from `base` for the stream named `salt`, index `k`.
///
/// Uses FNV-1a over the salt followed by splitmix64 finalization; stable
/// across platforms and releases so artifacts stay byte-reproducible.
pub fn derive_seed(base: u64, salt: &str, k: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    let mut z = base ^ h ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

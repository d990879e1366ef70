//! Stable hashing and seed derivation.
//!
//! `std::collections::hash_map::DefaultHasher` is not guaranteed stable
//! across releases, so token hashing and config fingerprints use FNV-1a and
//! seed streams use splitmix64. Both are fixed for the life of the on-disk
//! formats.

/// FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One splitmix64 step; bijective on u64.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named sub-stream of `base`.
///
/// Different `stream` values give unrelated RNG streams for the same base
/// seed, e.g. the two augmented views of one graph.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_matches_reference_vectors() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn derived_streams_differ() {
        let base = 42;
        assert_ne!(derive_seed(base, 0), derive_seed(base, 1));
        assert_ne!(derive_seed(base, 1), derive_seed(base, 2));
        // Deterministic.
        assert_eq!(derive_seed(base, 1), derive_seed(base, 1));
    }
}

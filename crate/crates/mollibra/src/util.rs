//! Small shared helpers.

/// FNV-1a over raw bytes; stable across platforms and builds.
pub(crate) fn fnv1a_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Map a 64-bit hash to the open unit interval, away from 0 and 1 so a
/// normal quantile transform stays finite.
pub(crate) fn hash_to_unit(h: u64) -> f64 {
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    u.clamp(1e-12, 1.0 - 1e-12)
}

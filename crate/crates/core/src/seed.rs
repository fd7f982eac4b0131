//! Seed derivation. Every source of randomness in the crate is derived from a
//! single root seed so that a run is reproducible from that one number.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed and a label (FNV-1a over the label,
/// then mixed with the root).
pub fn derive(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(root ^ mix64(h))
}

/// Derive the seed of the `index`-th run of a campaign.
pub fn nth(root: u64, index: u64) -> u64 {
    mix64(root.wrapping_add(mix64(index)))
}

//! Seed derivation. Every random stream is keyed by the user seed plus a
//! path of integers (graph index, seed index, ...), so a cell's stream never
//! depends on which thread runs it or in what order.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `base`; distinct paths give unrelated seeds.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0x5851_F42D)))
    })
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent random stream keyed by a seed and a purpose/index path, so
/// per-frame or per-cell work can run in any order.
pub(crate) fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let folded = key.iter().fold(mix(seed), |acc, &k| mix(acc ^ mix(k)));
    ChaCha8Rng::seed_from_u64(folded)
}

//! The toolkit's one named random generator: ChaCha8, seeded from a `u64`,
//! with independent streams selected by an index. Outputs depend only on
//! `(seed, stream)`, never on platform word size or thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ToolkitRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ToolkitRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ToolkitRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive child seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(mix(seed) ^ index)
}

/// Uniform index in `0..n` drawn through `u64` so 32- and 64-bit targets agree.
pub fn index_below(rng: &mut ToolkitRng, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}

/// In-place Fisher-Yates shuffle over `u64` draws.
pub fn shuffle<T>(rng: &mut ToolkitRng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index_below(rng, i + 1);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_differ_and_repeat() {
        let a: u64 = substream(7, 0).random();
        let b: u64 = substream(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, substream(7, 0).random::<u64>());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..50).collect();
        shuffle(&mut seeded(3), &mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}

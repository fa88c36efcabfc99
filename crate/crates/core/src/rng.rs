//! Seed derivation: every random stream is keyed by `(master, level, replicate)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one `(master, level, replicate)` triple.
pub fn stream(master: u64, level: u64, replicate: u64) -> Rng {
    let mut state = master;
    let mut seed = [0u8; 32];
    let words = [
        splitmix64(&mut state),
        splitmix64(&mut state) ^ level.wrapping_mul(0xD6E8_FEB8_6659_FD93),
        splitmix64(&mut state) ^ replicate.wrapping_mul(0xA076_1D64_78BD_642F),
        splitmix64(&mut state) ^ level.rotate_left(32) ^ replicate,
    ];
    let mut mix = words[0] ^ words[1] ^ words[2] ^ words[3];
    for (chunk, w) in seed.chunks_mut(8).zip(words) {
        let v = w ^ splitmix64(&mut mix);
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    Rng::from_seed(seed)
}

/// Uniform draw in (0, 1], safe for `ln`.
pub fn open_uniform<R: rand::Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: u64 = stream(7, 1, 2).random();
        let b: u64 = stream(7, 1, 2).random();
        let c: u64 = stream(7, 2, 1).random();
        let d: u64 = stream(8, 1, 2).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}

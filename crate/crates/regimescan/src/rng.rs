//! Counter-based random numbers.
//!
//! Every sample is a pure function of a key tuple (stream seed, neuron id,
//! step index), so simulation output cannot depend on execution order or
//! thread count. The mixer is the SplitMix64 finalizer applied over a short
//! absorb chain.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: full-avalanche 64-bit mix.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds one word into a running hash state. Position-sensitive, so
/// `absorb(absorb(h, a), b) != absorb(absorb(h, b), a)` in general.
#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.rotate_left(17) ^ word.wrapping_add(GOLDEN))
}

/// Hashes a word sequence down to a single 64-bit key.
#[inline]
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for &w in words {
        h = absorb(h, w);
    }
    h
}

/// Derives an independent child seed from `seed` under a fixed role tag.
#[inline]
pub fn split_seed(seed: u64, tag: u64) -> u64 {
    hash_words(&[seed, tag])
}

#[inline]
fn to_unit_open(bits: u64) -> f64 {
    // 53 mantissa bits, offset by half an ulp: result lies strictly in (0, 1).
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Stateless Gaussian noise stream keyed by (seed, neuron, step).
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Standard normal deviate for one (neuron, step) cell, via Box-Muller.
    #[inline]
    pub fn normal(&self, neuron: u32, step: u64) -> f64 {
        let key = hash_words(&[self.seed, u64::from(neuron), step]);
        let u1 = to_unit_open(mix64(key ^ 0xa5a5_a5a5_a5a5_a5a5));
        let u2 = to_unit_open(mix64(key ^ 0x5a5a_5a5a_5a5a_5a5a));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

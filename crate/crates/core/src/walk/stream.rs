use rand::distributions::{Distribution, Uniform};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-sample random stream.
///
/// Streams are ChaCha8 keyed by the master seed with the sample index as the
/// stream id, so the sequence handed to sample `i` is fixed by `(seed, i)`
/// alone and never depends on scheduling.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    bits: u64,
    bits_left: u32,
}

impl RandomStream {
    fn new(rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            bits: 0,
            bits_left: 0,
        }
    }

    /// Next fair bit; 64 bits are drawn per underlying word, low bit first.
    pub fn next_bit(&mut self) -> bool {
        if self.bits_left == 0 {
            self.bits = self.rng.next_u64();
            self.bits_left = 64;
        }
        let bit = self.bits & 1 == 1;
        self.bits >>= 1;
        self.bits_left -= 1;
        bit
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Next draw from Uniform[-1, 1].
    pub fn next_noise(&mut self) -> f64 {
        Uniform::new_inclusive(-1.0, 1.0).sample(&mut self.rng)
    }
}

/// Stream for sample `sample_index` under `master_seed`.
pub fn derive_stream(master_seed: u64, sample_index: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    RandomStream::new(rng)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of words into a single derived seed.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &w| {
        mix64(acc ^ mix64(w.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    })
}

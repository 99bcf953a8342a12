use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpinnError};

/// Seeded ChaCha8 stream. The generator is portable, so one seed gives the same
/// numbers on every platform, and its position can be saved and restored exactly.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream derived from `seed` and a purpose tag.
    pub fn derived(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    /// Serialised generator position: seed, stream and word position.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 + 8 + 16);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.inner.get_seed());
        out.extend_from_slice(&self.inner.get_stream().to_le_bytes());
        out.extend_from_slice(&self.inner.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 64 {
            return Err(SpinnError::Format(format!("rng state has {} bytes, expected 64", bytes.len())));
        }
        let seed = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let key: [u8; 32] = bytes[8..40].try_into().unwrap();
        let stream = u64::from_le_bytes(bytes[40..48].try_into().unwrap());
        let pos = u128::from_le_bytes(bytes[48..64].try_into().unwrap());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        inner.set_word_pos(pos);
        Ok(RngState { seed, inner })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn restore_resumes_mid_stream() {
        let mut a = RngState::derived(9, 3);
        for _ in 0..17 {
            a.unit();
        }
        let mut b = RngState::from_bytes(&a.to_bytes()).unwrap();
        for _ in 0..50 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}

//! Packed bit vectors with the popcount kernels the code layer leans on.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A bit string packed into 64-bit words, LSB-first within each word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.random()).collect();
        if let Some(last) = words.last_mut() {
            let tail = len % 64;
            if tail != 0 {
                *last &= (1u64 << tail) - 1;
            }
        }
        BitVec { words, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if b {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    pub fn push(&mut self, b: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, b);
    }

    pub fn flip(&mut self, i: usize) {
        let cur = self.get(i);
        self.set(i, !cur);
    }

    /// Number of ones.
    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hamming distance to `other`; both must have equal length.
    pub fn hamming(&self, other: &BitVec) -> usize {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Number of positions where the two vectors agree.
    pub fn agreement(&self, other: &BitVec) -> usize {
        self.len - self.hamming(other)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert_eq!(words.len(), len.div_ceil(64));
        BitVec { words, len }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn push_get_roundtrip() {
        let mut v = BitVec::zeros(0);
        let pattern = [true, false, true, true, false];
        for &b in &pattern {
            v.push(b);
        }
        assert_eq!(v.len(), 5);
        for (i, &b) in pattern.iter().enumerate() {
            assert_eq!(v.get(i), b);
        }
    }

    #[test]
    fn hamming_and_agreement() {
        let a = BitVec::from_bools(&[true, true, false, false]);
        let b = BitVec::from_bools(&[true, false, true, false]);
        assert_eq!(a.hamming(&b), 2);
        assert_eq!(a.agreement(&b), 2);
    }

    #[test]
    fn random_masks_tail_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = BitVec::random(&mut rng, 70);
        assert_eq!(v.len(), 70);
        // bits past the end must be zero so popcounts stay honest
        assert_eq!(v.words()[1] >> 6, 0);
    }

    #[test]
    fn agreement_matches_bitwise_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = BitVec::random(&mut rng, 257);
        let b = BitVec::random(&mut rng, 257);
        let slow = (0..257).filter(|&i| a.get(i) == b.get(i)).count();
        assert_eq!(a.agreement(&b), slow);
    }
}

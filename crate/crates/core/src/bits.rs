//! Packed bit strings indexed in round order.
//!
//! Position `0` holds the bit of round 1. The textual form is a string of
//! `'0'`/`'1'` characters in the same order, which is also the form used by
//! every fixture file.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit character {found:?} at position {position}")]
pub struct ParseBitsError {
    pub position: usize,
    pub found: char,
}

impl Bits {
    pub const fn new() -> Self {
        Self {
            words: Vec::new(),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: alloc::vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut bits = Self::zeros(len);
        for w in bits.words.iter_mut() {
            *w = u64::MAX;
        }
        bits.clear_tail();
        bits
    }

    pub fn with_capacity(len: usize) -> Self {
        Self {
            words: Vec::with_capacity(len.div_ceil(WORD)),
            len: 0,
        }
    }

    /// Uniformly random bits.
    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bits = Self::zeros(len);
        for w in bits.words.iter_mut() {
            *w = rng.next_u64();
        }
        bits.clear_tail();
        bits
    }

    /// Independent Bernoulli(`p`) bits.
    pub fn bernoulli<R: RngCore + ?Sized>(len: usize, p: f64, rng: &mut R) -> Self {
        let mut bits = Self::zeros(len);
        if p <= 0.0 {
            return bits;
        }
        for i in 0..len {
            if rng.random_bool(p.min(1.0)) {
                bits.set(i, true);
            }
        }
        bits
    }

    pub fn from_bools(bools: &[bool]) -> Self {
        bools.iter().copied().collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at 0-based position `i`. Panics when out of range.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(len.div_ceil(WORD));
        self.clear_tail();
    }

    pub fn clear(&mut self) {
        self.words.clear();
        self.len = 0;
    }

    /// First `len` bits as a new string.
    pub fn prefix(&self, len: usize) -> Bits {
        let mut out = self.clone();
        out.truncate(len);
        out
    }

    /// Bits `start..end` as a new string.
    pub fn slice(&self, start: usize, end: usize) -> Bits {
        assert!(start <= end && end <= self.len);
        (start..end).map(|i| self.get(i)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// Parity of `popcount(self & other)` restricted to the first `upto` positions.
    #[inline]
    pub fn and_parity(&self, other: &Bits, upto: usize) -> bool {
        debug_assert!(upto <= self.len && upto <= other.len);
        let full = upto / WORD;
        let mut acc = 0u64;
        for k in 0..full {
            acc ^= self.words[k] & other.words[k];
        }
        let rem = upto % WORD;
        if rem != 0 {
            acc ^= self.words[full] & other.words[full] & ((1u64 << rem) - 1);
        }
        acc.count_ones() & 1 == 1
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(
            self.len, other.len,
            "xor of bit strings of different length"
        );
        Bits {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    pub fn iter(&self) -> Iter<'_> {
        Iter { bits: self, pos: 0 }
    }

    /// Packed little-endian bytes, round 1 in the lowest bit of byte 0.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len.div_ceil(8));
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(self.len.div_ceil(8));
        out
    }

    /// First `len` bits of `bytes`, read in the order produced by [`Bits::to_bytes`].
    pub fn from_bytes(bytes: &[u8], len: usize) -> Bits {
        assert!(bytes.len() * 8 >= len, "not enough bytes for {len} bits");
        let mut out = Bits::zeros(len);
        for (k, chunk) in bytes.chunks(8).enumerate().take(out.words.len()) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            out.words[k] = u64::from_le_bytes(buf);
        }
        out.clear_tail();
        out
    }

    pub fn to_bit_string(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

pub struct Iter<'a> {
    bits: &'a Bits,
    pos: usize,
}

impl Iterator for Iter<'_> {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        if self.pos < self.bits.len {
            self.pos += 1;
            Some(self.bits.get(self.pos - 1))
        } else {
            None
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.bits.len - self.pos;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Iter<'_> {}

impl<'a> IntoIterator for &'a Bits {
    type Item = bool;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut out = Bits::with_capacity(iter.size_hint().0);
        for b in iter {
            out.push(b);
        }
        out
    }
}

impl FromStr for Bits {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(position, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                found => Err(ParseBitsError { position, found }),
            })
            .collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    #[test]
    fn text_round_trip_keeps_round_order() {
        let b: Bits = "1100101".parse().unwrap();
        assert!(b.get(0) && b.get(1) && !b.get(2));
        assert_eq!(b.to_string(), "1100101");
        assert_eq!(b.count_ones(), 4);
    }

    #[test]
    fn rejects_foreign_characters() {
        let err = "01x1".parse::<Bits>().unwrap_err();
        assert_eq!(err.position, 2);
        assert_eq!(err.found, 'x');
    }

    #[test]
    fn and_parity_crosses_word_boundary() {
        let mut rng = SmallRng::seed_from_u64(7);
        for len in [1usize, 63, 64, 65, 130] {
            let a = Bits::random(len, &mut rng);
            let b = Bits::random(len, &mut rng);
            for upto in 0..=len {
                let naive = (0..upto).filter(|&i| a.get(i) && b.get(i)).count() % 2 == 1;
                assert_eq!(a.and_parity(&b, upto), naive, "len {len} upto {upto}");
            }
        }
    }

    #[test]
    fn bytes_round_trip() {
        let mut rng = SmallRng::seed_from_u64(3);
        for len in [1usize, 8, 9, 64, 100] {
            let a = Bits::random(len, &mut rng);
            assert_eq!(Bits::from_bytes(&a.to_bytes(), len), a);
        }
    }

    #[test]
    fn truncate_clears_stale_bits() {
        let mut a = Bits::ones(70);
        a.truncate(3);
        assert_eq!(a.count_ones(), 3);
        a.push(false);
        assert_eq!(a.to_string(), "1110");
        assert_eq!(Bits::ones(70).slice(60, 66).to_string(), "111111");
    }
}

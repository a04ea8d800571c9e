//! Fixed-length bit vectors backed by `u64` words.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64`. Byte serialization
//! uses little-endian bit order: bit `i` is bit `i % 8` of byte `i / 8`.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

#[inline]
pub(crate) fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        v.mask_tail();
        v
    }

    /// Builds a vector from raw words; bits past `len` are cleared.
    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert_eq!(words.len(), words_for(len), "word count does not match length");
        let mut v = Self { words, len };
        v.mask_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn all_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// In-place OR with a word slice of the same length.
    #[inline]
    pub fn or_assign_words(&mut self, other: &[u64]) {
        debug_assert_eq!(self.words.len(), other.len());
        for (a, b) in self.words.iter_mut().zip(other) {
            *a |= *b;
        }
    }

    pub fn or_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "length mismatch in OR");
        self.or_assign_words(&other.words);
    }

    /// True when every set bit of `other` is also set in `self`.
    #[inline]
    pub fn covers_words(&self, other: &[u64]) -> bool {
        covers(&self.words, other)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        words_to_bytes(&self.words, self.len)
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        Some(Self::from_words(bytes_to_words(bytes, len), len))
    }
}

/// `container` covers `word` when `word & !container == 0` word by word.
#[inline]
pub(crate) fn covers(container: &[u64], word: &[u64]) -> bool {
    container.iter().zip(word).all(|(c, w)| w & !c == 0)
}

pub(crate) fn words_to_bytes(words: &[u64], len: usize) -> Vec<u8> {
    let nbytes = len.div_ceil(8);
    (0..nbytes).map(|j| (words[j / 8] >> (8 * (j % 8))) as u8).collect()
}

pub(crate) fn bytes_to_words(bytes: &[u8], len: usize) -> Vec<u64> {
    let mut words = vec![0u64; words_for(len)];
    for (j, &byte) in bytes.iter().enumerate() {
        words[j / 8] |= (byte as u64) << (8 * (j % 8));
    }
    words
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[{}](", self.len)?;
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

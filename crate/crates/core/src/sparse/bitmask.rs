//! Presence bit vectors and the alignment kernels that run over them.
//!
//! Bit `i` describes element `i` of the dense vector it was built from. The
//! textual form prints index 0 leftmost, so `"0011"` has bits 2 and 3 set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BitMask {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        BitMask {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = BitMask {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        m.clear_tail();
        m
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % WORD == 0 {
                words.push(0);
            }
            if b {
                words[len / WORD] |= 1 << (len % WORD);
            }
            len += 1;
        }
        BitMask { len, words }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut m = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                m.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        m
    }

    /// Rebuilds a mask from raw little-endian-bit words. Bits beyond `len`
    /// must be clear.
    pub fn from_words(len: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != word_count(len) {
            return Err(Error::structural(format!(
                "mask of {len} bits needs {} words, got {}",
                word_count(len),
                words.len()
            )));
        }
        let m = BitMask { len, words };
        if let Some(&last) = m.words.last() {
            let used = len % WORD;
            if used != 0 && last >> used != 0 {
                return Err(Error::structural("bits set beyond mask length"));
            }
        }
        Ok(m)
    }

    fn clear_tail(&mut self) {
        let used = self.len % WORD;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
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
        assert!(i < self.len, "bit {i} out of range for mask of {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for mask of {}", self.len);
        let bit = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= bit;
        } else {
            self.words[i / WORD] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.count_ones() as f64 / self.len as f64
        }
    }

    /// Bitwise AND of two equal-length masks.
    pub fn and(&self, other: &BitMask) -> Result<BitMask> {
        if self.len != other.len {
            return Err(Error::dim(format!(
                "mask lengths differ: {} vs {}",
                self.len, other.len
            )));
        }
        Ok(BitMask {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    /// Leading non-zero detect: the first set bit at or after `start`.
    pub fn lnzd(&self, start: usize) -> Option<usize> {
        assert!(start <= self.len, "lnzd start {start} beyond {}", self.len);
        if start == self.len {
            return None;
        }
        let mut wi = start / WORD;
        let mut w = self.words[wi] & (u64::MAX << (start % WORD));
        loop {
            if w != 0 {
                return Some(wi * WORD + w.trailing_zeros() as usize);
            }
            wi += 1;
            if wi == self.words.len() {
                return None;
            }
            w = self.words[wi];
        }
    }

    /// Number of set bits strictly below `idx`; the compact-storage address
    /// of element `idx` when that element is set.
    pub fn prefix_popcount(&self, idx: usize) -> usize {
        assert!(idx <= self.len, "prefix index {idx} beyond {}", self.len);
        let full = idx / WORD;
        let mut n: usize = self.words[..full]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum();
        let rem = idx % WORD;
        if rem != 0 {
            n += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as usize;
        }
        n
    }

    /// Set-bit count within `[start, end)`.
    pub fn count_range(&self, start: usize, end: usize) -> usize {
        self.prefix_popcount(end) - self.prefix_popcount(start)
    }

    pub fn iter_ones(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            idx: 0,
            cur: self.words.first().copied().unwrap_or(0),
        }
    }

    /// Copies bits `[start, end)` into a new mask of length `end - start`.
    pub fn slice(&self, start: usize, end: usize) -> BitMask {
        assert!(start <= end && end <= self.len);
        BitMask::from_fn(end - start, |i| self.get(start + i))
    }
}

pub struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let b = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * WORD + b);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

/// AND of a weight mask and an activation mask. Its popcount is exactly the
/// number of multiply-accumulates the pair requires.
pub fn work_mask(weights: &BitMask, acts: &BitMask) -> Result<BitMask> {
    weights.and(acts)
}

impl fmt::Display for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMask({self})")
    }
}

impl FromStr for BitMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::parse(
                    None,
                    format!("invalid mask character {other:?} at offset {i}"),
                )),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitMask::from_bools)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> BitMask {
        s.parse().unwrap()
    }

    #[test]
    fn text_is_index_zero_leftmost() {
        let mask = m("0011");
        assert!(!mask.get(0) && !mask.get(1) && mask.get(2) && mask.get(3));
        assert_eq!(mask.to_string(), "0011");
    }

    #[test]
    fn work_mask_examples() {
        assert_eq!(work_mask(&m("0011"), &m("1110")).unwrap(), m("0010"));
        assert_eq!(work_mask(&m("1011"), &m("0000")).unwrap(), m("0000"));
        assert_eq!(work_mask(&m("1111"), &m("1010")).unwrap(), m("1010"));
        assert!(matches!(
            work_mask(&m("111"), &m("1111")),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn lnzd_examples() {
        assert_eq!(m("0010").lnzd(0), Some(2));
        assert_eq!(m("0000").lnzd(0), None);
        assert_eq!(m("1011").lnzd(1), Some(2));
        assert_eq!(m("1011").lnzd(4), None);
    }

    #[test]
    fn prefix_popcount_examples() {
        assert_eq!(m("0011").prefix_popcount(2), 0);
        assert_eq!(m("1110").prefix_popcount(2), 2);
        assert_eq!(m("1111").prefix_popcount(0), 0);
        assert_eq!(m("1111").prefix_popcount(4), 4);
    }

    #[test]
    fn crosses_word_boundaries() {
        let mask = BitMask::from_fn(200, |i| i == 63 || i == 64 || i == 190);
        assert_eq!(mask.lnzd(0), Some(63));
        assert_eq!(mask.lnzd(64), Some(64));
        assert_eq!(mask.lnzd(65), Some(190));
        assert_eq!(mask.prefix_popcount(190), 2);
        assert_eq!(mask.iter_ones().collect::<Vec<_>>(), vec![63, 64, 190]);
        assert_eq!(BitMask::ones(130).count_ones(), 130);
        assert_eq!(mask.slice(60, 70).to_string(), "0001100000");
    }

    #[test]
    fn from_words_rejects_stray_bits() {
        assert!(BitMask::from_words(3, vec![0b1000]).is_err());
        assert!(BitMask::from_words(3, vec![]).is_err());
        assert_eq!(BitMask::from_words(3, vec![0b101]).unwrap(), m("101"));
    }

    #[test]
    fn rejects_bad_text() {
        assert!("01x".parse::<BitMask>().is_err());
    }
}

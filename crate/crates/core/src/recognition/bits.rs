use crate::error::{EcoError, Result};
use crate::semantic::{CanonicalEncoding, SemanticDescription};

/// Packed 0/1 input vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i);
            }
        }
        v
    }

    /// Encoding bits zero-padded or truncated to `width`.
    pub fn from_encoding(enc: &CanonicalEncoding, width: usize) -> Self {
        let mut v = Self::zeros(width);
        for (i, bit) in enc.bits().take(width).enumerate() {
            if bit {
                v.set(i);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Squared Euclidean distance, which for 0/1 vectors is the Hamming
    /// distance.
    pub fn hamming(&self, other: &BitVector) -> Result<u32> {
        if self.len != other.len {
            return Err(EcoError::WidthMismatch { expected: self.len, actual: other.len });
        }
        Ok(self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones()).sum())
    }
}

/// Canonical encoding of `desc` fitted to a recognizer's input width.
pub fn encode_input(desc: &SemanticDescription, width: usize) -> BitVector {
    BitVector::from_encoding(&desc.encode(), width)
}

//! Bit vectors over F₂.
//!
//! Coordinates are numbered from 1 in documentation and from 0 in code.
//! Coordinate 1 (index 0) is the least significant bit of the integer
//! encoding, and every probability table in the crate is indexed by that
//! encoding.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

const WORD_BITS: usize = 64;

/// An element of F₂^m, packed into 64-bit words.
///
/// Bits at positions `>= len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; len.div_ceil(WORD_BITS)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Inverse of [`BitVector::encode`]. Bits of `value` above `len` are ignored.
    pub fn decode(value: u64, len: usize) -> Self {
        let mut v = BitVector::zeros(len);
        if len > 0 {
            let mask = if len >= WORD_BITS {
                u64::MAX
            } else {
                (1u64 << len) - 1
            };
            v.words[0] = value & mask;
        }
        v
    }

    pub(crate) fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(len.div_ceil(WORD_BITS), 0);
        let mut v = BitVector { len, words };
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if bit {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Σ v_i·2^(i−1), coordinate 1 least significant.
    ///
    /// # Panics
    ///
    /// If the vector is longer than 64 bits.
    pub fn encode(&self) -> u64 {
        assert!(
            self.len <= WORD_BITS,
            "cannot encode a {}-bit vector into 64 bits",
            self.len
        );
        self.words.first().copied().unwrap_or(0)
    }

    /// The low `bits` coordinates as an integer.
    pub fn low_bits(&self, bits: usize) -> u64 {
        let bits = bits.min(self.len).min(WORD_BITS);
        if bits == 0 {
            return 0;
        }
        let mask = if bits == WORD_BITS {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        };
        self.words[0] & mask
    }

    /// ⟨u, v⟩ mod 2.
    pub fn inner_product(&self, other: &BitVector) -> Result<bool, Error> {
        self.check_len(other)?;
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        Ok(ones & 1 == 1)
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector, Error> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &BitVector) -> Result<(), Error> {
        self.check_len(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    fn check_len(&self, other: &BitVector) -> Result<(), Error> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(())
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

/// Textual form: one character per coordinate, coordinate 1 first.
impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!(
                    "invalid character {other:?} in bit string {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitVector::from_bits(&bits))
    }
}

impl serde::Serialize for BitVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for BitVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

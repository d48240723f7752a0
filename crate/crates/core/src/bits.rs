//! Bit strings of arbitrary (not necessarily byte-aligned) length.
//!
//! Index 0 is the leftmost / first-transmitted bit. Serialization is
//! lowercase hex (bits packed MSB-first) plus an explicit bit length, so
//! non-byte-aligned strings round-trip exactly.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// An ordered sequence of bits. XOR is defined only on equal lengths.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self { bits: Vec::new() }
    }

    /// All-zero string of length `n`.
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bit values must be 0 or 1".into()));
        }
        Ok(Self { bits: bits.to_vec() })
    }

    /// Parse from a string of '0'/'1' characters.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "invalid bit character {c:?}"
                    )))
                }
            }
        }
        Ok(Self { bits })
    }

    /// `n` independent fair bits from `rng`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let bits = (0..n).map(|_| rng.random::<bool>() as u8).collect();
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits.push(bit);
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument(format!(
                "xor length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitString { bits })
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    /// The first `n` bits.
    pub fn prefix(&self, n: usize) -> BitString {
        BitString {
            bits: self.bits[..n].to_vec(),
        }
    }

    /// Contiguous sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString {
            bits: self.bits[start..end].to_vec(),
        }
    }

    /// Bits at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> BitString {
        BitString {
            bits: positions.iter().map(|&i| self.bits[i]).collect(),
        }
    }

    /// Lowercase hex, bits packed MSB-first, final byte zero-padded.
    pub fn to_hex(&self) -> String {
        let nbytes = self.bits.len().div_ceil(8);
        let mut out = String::with_capacity(nbytes * 2);
        for byte_idx in 0..nbytes {
            let mut byte = 0u8;
            for k in 0..8 {
                let i = byte_idx * 8 + k;
                if i < self.bits.len() && self.bits[i] == 1 {
                    byte |= 1 << (7 - k);
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        if hex.len() != len.div_ceil(8) * 2 {
            return Err(Error::InvalidArgument(format!(
                "hex length {} does not match bit length {len}",
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(len);
        let bytes = hex.as_bytes();
        for i in 0..len {
            let hexpos = i / 4;
            let nibble = match bytes[hexpos] {
                c @ b'0'..=b'9' => c - b'0',
                c @ b'a'..=b'f' => c - b'a' + 10,
                c => {
                    return Err(Error::InvalidArgument(format!(
                        "invalid hex character {:?}",
                        c as char
                    )))
                }
            };
            bits.push((nibble >> (3 - i % 4)) & 1);
        }
        // padding bits past `len` must be zero
        for i in len..hex.len() * 4 {
            let nibble = match bytes[i / 4] {
                c @ b'0'..=b'9' => c - b'0',
                c @ b'a'..=b'f' => c - b'a' + 10,
                _ => 0,
            };
            if (nibble >> (3 - i % 4)) & 1 != 0 {
                return Err(Error::InvalidArgument("nonzero hex padding".into()));
            }
        }
        Ok(Self { bits })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRepr {
    hex: String,
    len: usize,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BitStringRepr {
            hex: self.to_hex(),
            len: self.len(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BitStringRepr::deserialize(deserializer)?;
        BitString::from_hex(&repr.hex, repr.len).map_err(serde::de::Error::custom)
    }
}

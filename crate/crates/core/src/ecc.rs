//! Repetition code used to reconcile the sifted key into an error-free
//! final key. Each payload bit is repeated `r` times; decoding is majority
//! vote per block, correcting up to (r-1)/2 flips per block.

use serde::{Deserialize, Serialize};

use crate::{bits::BitString, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionCode {
    r: usize,
}

impl Default for RepetitionCode {
    fn default() -> Self {
        Self { r: 5 }
    }
}

impl RepetitionCode {
    /// `r` must be odd and at least 3.
    pub fn new(r: usize) -> Result<Self> {
        if r < 3 || r % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "repetition factor must be odd and >= 3, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Flips correctable per block.
    pub fn correctable(&self) -> usize {
        (self.r - 1) / 2
    }

    pub fn encode(&self, payload: &BitString) -> Result<BitString> {
        if payload.is_empty() {
            return Err(Error::InvalidArgument("empty payload".into()));
        }
        let mut out = BitString::new();
        for bit in payload.iter() {
            for _ in 0..self.r {
                out.push(bit);
            }
        }
        Ok(out)
    }

    pub fn decode(&self, codeword: &BitString) -> Result<BitString> {
        if codeword.len() % self.r != 0 {
            return Err(Error::InvalidArgument(format!(
                "codeword length {} not divisible by {}",
                codeword.len(),
                self.r
            )));
        }
        let mut out = BitString::new();
        for block in 0..codeword.len() / self.r {
            let ones = (0..self.r)
                .filter(|k| codeword.bit(block * self.r + k) == 1)
                .count();
            out.push((ones > self.r / 2) as u8);
        }
        Ok(out)
    }
}

use std::fmt;

use crate::error::{Error, Result};

/// Fixed-length bit vector of at most 128 bits, the input to an aggregator tree.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    word: u128,
    len: u8,
}

impl Bits {
    pub const MAX_LEN: usize = 128;

    pub fn zeros(len: usize) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::EncodingMismatch(format!(
                "{len} bits exceed the {} bit input limit",
                Self::MAX_LEN
            )));
        }
        Ok(Bits {
            word: 0,
            len: len as u8,
        })
    }

    pub fn from_word(word: u128, len: usize) -> Result<Self> {
        let mut b = Self::zeros(len)?;
        b.word = word & mask(len);
        Ok(b)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let mut b = Self::zeros(bits.len())?;
        for (i, &x) in bits.iter().enumerate() {
            b.set(i, x);
        }
        Ok(b)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn word(&self) -> u128 {
        self.word
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.word >> i) & 1 == 1
    }

    pub fn get_checked(&self, i: usize) -> Result<bool> {
        if i >= self.len() {
            return Err(Error::EncodingMismatch(format!(
                "variable x{i} out of range for a {}-bit input",
                self.len
            )));
        }
        Ok(self.get(i))
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len());
        if v {
            self.word |= 1u128 << i;
        } else {
            self.word &= !(1u128 << i);
        }
    }

    pub fn flipped(mut self, i: usize) -> Self {
        self.word ^= 1u128 << i;
        self
    }
}

#[inline]
pub(crate) fn mask(len: usize) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

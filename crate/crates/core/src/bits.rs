// SPDX-License-Identifier: Apache-2.0
//! Fixed-width bit vectors used for input patterns and sampled output words.
//!
//! Bit 0 is the least significant bit and corresponds to the first net of a
//! port list. Widths up to 128 bits are supported, which covers every
//! benchmark the generators can emit (a 64-bit multiplier has 128 inputs).

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAX_WIDTH: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("bit width {0} exceeds the supported maximum of {MAX_WIDTH}")]
    TooWide(usize),
    #[error("invalid hex literal `{0}`")]
    BadHex(String),
    #[error("value 0x{value:x} does not fit in {width} bits")]
    Overflow { value: u128, width: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    value: u128,
    width: u8,
}

#[inline]
fn mask(width: usize) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

impl Bits {
    pub fn new(value: u128, width: usize) -> Result<Self, BitsError> {
        if width > MAX_WIDTH {
            return Err(BitsError::TooWide(width));
        }
        if value & !mask(width) != 0 {
            return Err(BitsError::Overflow { value, width });
        }
        Ok(Self { value, width: width as u8 })
    }

    /// Builds a word from the low `width` bits of `value`, discarding the rest.
    pub fn truncate(value: u128, width: usize) -> Self {
        assert!(width <= MAX_WIDTH, "width {width} too large");
        Self { value: value & mask(width), width: width as u8 }
    }

    pub fn zero(width: usize) -> Self {
        Self::truncate(0, width)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = 0u128;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v |= 1 << i;
            }
        }
        Self::truncate(v, bits.len())
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn value(&self) -> u128 {
        self.value
    }

    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.width());
        (self.value >> i) & 1 == 1
    }

    pub fn with_bit(mut self, i: usize, b: bool) -> Self {
        assert!(i < self.width());
        if b {
            self.value |= 1 << i;
        } else {
            self.value &= !(1 << i);
        }
        self
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width()).map(|i| self.bit(i)).collect()
    }

    /// Bits `[lo, lo + len)` as a new word.
    pub fn slice(&self, lo: usize, len: usize) -> Self {
        assert!(lo + len <= self.width());
        Self::truncate(self.value >> lo, len)
    }

    /// `self` in the low bits followed by `hi`.
    pub fn concat(&self, hi: &Bits) -> Self {
        let w = self.width() + hi.width();
        assert!(w <= MAX_WIDTH);
        Self::truncate(self.value | (hi.value << self.width()), w)
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }

    /// Lower-case hex without prefix; always at least one digit and exactly
    /// `ceil(width / 4)` digits so equal-width words format to equal lengths.
    pub fn to_hex(&self) -> String {
        let digits = self.width().div_ceil(4).max(1);
        format!("{:0digits$x}", self.value, digits = digits)
    }

    pub fn from_hex(s: &str, width: usize) -> Result<Self, BitsError> {
        let t = s.trim();
        let t = t.strip_prefix("0x").unwrap_or(t);
        if t.is_empty() {
            return Err(BitsError::BadHex(s.to_string()));
        }
        let v = u128::from_str_radix(t, 16).map_err(|_| BitsError::BadHex(s.to_string()))?;
        Self::new(v, width)
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{}", self.width, self.to_hex())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width()).rev() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Serialized as `"<width>'h<hex>"` so the width survives a round trip.
impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}'h{}", self.width, self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let (w, h) = s
            .split_once("'h")
            .ok_or_else(|| serde::de::Error::custom(format!("expected <width>'h<hex>, got {s}")))?;
        let width: usize = w.parse().map_err(serde::de::Error::custom)?;
        Bits::from_hex(h, width).map_err(serde::de::Error::custom)
    }
}

//! Fixed-width bitstrings.
//!
//! [`Bits`] is the common representation behind link identifiers, forwarding
//! identifiers and TCAM match values/masks. Widths go up to [`MAX_WIDTH`] bits,
//! which is the full overloadable header budget. Bit `i` has value `2^i`, so the
//! textual form (lowercase hex, most-significant digit first) of a bitstring with
//! only bit 0 set ends in `1`.

use std::fmt;
use std::ops::{BitAnd, BitOr};

use thiserror::Error;

/// Largest supported width in bits.
pub const MAX_WIDTH: usize = 384;

const WORDS: usize = MAX_WIDTH / 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("bit width {0} is outside 1..={MAX_WIDTH}")]
    WidthOutOfRange(usize),
    #[error("bit widths differ: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("bit index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("invalid hex bitstring {text:?}: {reason}")]
    BadHex { text: String, reason: &'static str },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    width: u16,
    words: [u64; WORDS],
}

impl Bits {
    pub fn zeros(width: usize) -> Result<Self, BitsError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(BitsError::WidthOutOfRange(width));
        }
        Ok(Bits { width: width as u16, words: [0; WORDS] })
    }

    /// Bitstring with every bit in `0..width` set.
    pub fn ones(width: usize) -> Result<Self, BitsError> {
        let mut b = Self::zeros(width)?;
        for i in 0..width {
            b.words[i / 64] |= 1 << (i % 64);
        }
        Ok(b)
    }

    pub fn with_bits<I: IntoIterator<Item = usize>>(width: usize, bits: I) -> Result<Self, BitsError> {
        let mut b = Self::zeros(width)?;
        for i in bits {
            b.set(i)?;
        }
        Ok(b)
    }

    /// Low `width` bits of `value`. Bits of `value` above `width` are an error.
    pub fn from_u128(width: usize, value: u128) -> Result<Self, BitsError> {
        let mut b = Self::zeros(width)?;
        if width < 128 && value >> width != 0 {
            return Err(BitsError::IndexOutOfRange { index: 128 - value.leading_zeros() as usize - 1, width });
        }
        b.words[0] = value as u64;
        if WORDS > 1 {
            b.words[1] = (value >> 64) as u64;
        }
        Ok(b)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    #[inline]
    fn nwords(&self) -> usize {
        (self.width as usize).div_ceil(64)
    }

    pub fn set(&mut self, index: usize) -> Result<(), BitsError> {
        if index >= self.width() {
            return Err(BitsError::IndexOutOfRange { index, width: self.width() });
        }
        self.words[index / 64] |= 1 << (index % 64);
        Ok(())
    }

    pub fn clear(&mut self, index: usize) -> Result<(), BitsError> {
        if index >= self.width() {
            return Err(BitsError::IndexOutOfRange { index, width: self.width() });
        }
        self.words[index / 64] &= !(1 << (index % 64));
        Ok(())
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        index < self.width() && self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words[..self.nwords()].iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words[..self.nwords()].iter().all(|&w| w == 0)
    }

    /// Indices of set bits in ascending order.
    pub fn ones_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nwords()).flat_map(move |wi| {
            let mut w = self.words[wi];
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    fn check_width(&self, other: &Bits) -> Result<(), BitsError> {
        if self.width != other.width {
            return Err(BitsError::WidthMismatch { left: self.width(), right: other.width() });
        }
        Ok(())
    }

    pub fn try_or(&self, other: &Bits) -> Result<Bits, BitsError> {
        self.check_width(other)?;
        Ok(*self | *other)
    }

    pub fn try_and(&self, other: &Bits) -> Result<Bits, BitsError> {
        self.check_width(other)?;
        Ok(*self & *other)
    }

    /// True iff every set bit of `sub` is also set in `self`.
    #[inline]
    pub fn contains(&self, sub: &Bits) -> bool {
        debug_assert_eq!(self.width, sub.width);
        (0..self.nwords()).all(|i| self.words[i] & sub.words[i] == sub.words[i])
    }

    /// `value == self & mask`, word by word.
    #[inline]
    pub fn masked_eq(&self, mask: &Bits, value: &Bits) -> bool {
        debug_assert_eq!(self.width, mask.width);
        (0..self.nwords()).all(|i| self.words[i] & mask.words[i] == value.words[i])
    }

    pub fn is_disjoint(&self, other: &Bits) -> bool {
        (0..self.nwords()).all(|i| self.words[i] & other.words[i] == 0)
    }

    /// Copies `len` bits starting at `from` into the low bits of a `u128`.
    pub fn extract(&self, from: usize, len: usize) -> u128 {
        debug_assert!(len <= 128);
        let mut out = 0u128;
        for j in 0..len {
            if self.get(from + j) {
                out |= 1 << j;
            }
        }
        out
    }

    /// Writes the low `len` bits of `value` at positions `from..from+len`.
    pub fn deposit(&mut self, from: usize, len: usize, value: u128) -> Result<(), BitsError> {
        for j in 0..len {
            let idx = from + j;
            if value >> j & 1 == 1 {
                self.set(idx)?;
            } else if idx < self.width() {
                self.clear(idx)?;
            }
        }
        Ok(())
    }

    pub fn to_hex(&self) -> String {
        let digits = self.width().div_ceil(4);
        let mut s = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let nibble = self.extract(d * 4, 4) as u32;
            s.push(char::from_digit(nibble, 16).expect("nibble < 16"));
        }
        s
    }

    /// Parses the hex form produced by [`Bits::to_hex`]. An optional `0x` prefix
    /// and fewer than `ceil(width/4)` digits (implicit leading zeros) are accepted.
    pub fn from_hex(width: usize, text: &str) -> Result<Self, BitsError> {
        let bad = |reason| BitsError::BadHex { text: text.to_string(), reason };
        let body = text.strip_prefix("0x").unwrap_or(text);
        if body.is_empty() {
            return Err(bad("empty"));
        }
        let mut b = Self::zeros(width)?;
        for (d, c) in body.chars().rev().enumerate() {
            let nibble = c.to_digit(16).ok_or_else(|| bad("non-hex digit"))? as u128;
            if nibble == 0 {
                continue;
            }
            for j in 0..4 {
                if nibble >> j & 1 == 1 {
                    b.set(d * 4 + j).map_err(|_| bad("value wider than bit width"))?;
                }
            }
        }
        Ok(b)
    }
}

impl BitOr for Bits {
    type Output = Bits;

    fn bitor(mut self, rhs: Bits) -> Bits {
        assert_eq!(self.width, rhs.width, "bit width mismatch");
        for i in 0..self.nwords() {
            self.words[i] |= rhs.words[i];
        }
        self
    }
}

impl BitAnd for Bits {
    type Output = Bits;

    fn bitand(mut self, rhs: Bits) -> Bits {
        assert_eq!(self.width, rhs.width, "bit width mismatch");
        for i in 0..self.nwords() {
            self.words[i] &= rhs.words[i];
        }
        self
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Serializes as the hex form.
impl serde::Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits<{}>({})", self.width, self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_is_msb_first_fixed_width() {
        let b = Bits::with_bits(8, [0]).unwrap();
        assert_eq!(b.to_hex(), "01");
        let b = Bits::with_bits(256, [255]).unwrap();
        let h = b.to_hex();
        assert_eq!(h.len(), 64);
        assert!(h.starts_with('8'));
        assert!(h[1..].chars().all(|c| c == '0'));
    }

    #[test]
    fn rejects_bad_widths_and_digits() {
        assert_eq!(Bits::zeros(0), Err(BitsError::WidthOutOfRange(0)));
        assert_eq!(Bits::zeros(385), Err(BitsError::WidthOutOfRange(385)));
        assert!(Bits::from_hex(8, "1g").is_err());
        assert!(Bits::from_hex(8, "100").is_err());
        assert!(Bits::from_hex(6, "40").is_err());
        assert_eq!(Bits::from_hex(8, "0x0f").unwrap(), Bits::from_u128(8, 0xf).unwrap());
    }

    #[test]
    fn or_width_mismatch_is_error() {
        let a = Bits::zeros(8).unwrap();
        let b = Bits::zeros(16).unwrap();
        assert_eq!(a.try_or(&b), Err(BitsError::WidthMismatch { left: 8, right: 16 }));
    }

    #[test]
    fn extract_deposit_across_word_boundary() {
        let mut b = Bits::zeros(384).unwrap();
        b.deposit(60, 20, 0xabcde).unwrap();
        assert_eq!(b.extract(60, 20), 0xabcde);
        assert_eq!(b.count_ones(), (0xabcdeu32).count_ones());
    }

    proptest! {
        #[test]
        fn hex_round_trip(width in 1usize..=384, seed in any::<u64>()) {
            let mut b = Bits::zeros(width).unwrap();
            let mut x = seed;
            for i in 0..width {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if x >> 63 == 1 { b.set(i).unwrap(); }
            }
            prop_assert_eq!(Bits::from_hex(width, &b.to_hex()).unwrap(), b);
            prop_assert_eq!(b.ones_iter().count() as u32, b.count_ones());
        }
    }
}

//! Bit strings and a padding bit reader.
//!
//! Bits are packed MSB-first when converted to bytes; the bit length travels
//! separately so a ciphertext of any length survives a byte round-trip.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("bit length {len} exceeds the {available} bits in the payload")]
    LengthExceedsPayload { len: usize, available: usize },
    #[error("invalid hex digit {0:?}")]
    InvalidHex(char),
    #[error("invalid bit character {0:?}, expected '0' or '1'")]
    InvalidBit(char),
}

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse_binary(s: &str) -> Result<Self, BitsError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bools)
    }

    /// Takes the first `len` bits of `bytes`, MSB-first.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, BitsError> {
        let available = bytes.len() * 8;
        if len > available {
            return Err(BitsError::LengthExceedsPayload { len, available });
        }
        let bits = (0..len)
            .map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1)
            .collect();
        Ok(Self { bits })
    }

    /// Packs MSB-first, zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (7 - i % 8);
            }
        }
        out
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self, BitsError> {
        let digits: Vec<u8> = hex
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                c.to_digit(16)
                    .map(|d| d as u8)
                    .ok_or(BitsError::InvalidHex(c))
            })
            .collect::<Result<_, _>>()?;
        let available = digits.len() * 4;
        if len > available {
            return Err(BitsError::LengthExceedsPayload { len, available });
        }
        let bits = (0..len)
            .map(|i| digits[i / 4] >> (3 - i % 4) & 1 == 1)
            .collect();
        Ok(Self { bits })
    }

    /// Lowercase hex of the zero-padded byte form.
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Big-endian encoding of `value` in `width` bits.
    pub fn from_uint(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        let bits = (0..width).rev().map(|i| value >> i & 1 == 1).collect();
        Self { bits }
    }

    /// Big-endian value of `bits[start..start + width]`.
    pub fn read_uint(&self, start: usize, width: usize) -> Option<u64> {
        assert!(width <= 64);
        let slice = self.bits.get(start..start + width)?;
        Some(slice.iter().fold(0u64, |acc, &b| acc << 1 | b as u64))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        Self {
            bits: self.bits[start..end].to_vec(),
        }
    }

    pub fn starts_with(&self, other: &BitString) -> bool {
        self.bits.starts_with(&other.bits)
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader::new(self)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self {
            bits: iter.into_iter().collect(),
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Sequential reader that yields `0` once the underlying bits run out, and
/// counts how many delivered bits were real versus padding.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
    padding: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self {
            bits,
            pos: 0,
            padding: 0,
        }
    }

    pub fn read_bit(&mut self) -> bool {
        match self.bits.get(self.pos) {
            Some(b) => {
                self.pos += 1;
                b
            }
            None => {
                self.padding += 1;
                false
            }
        }
    }

    /// Reads `width` bits as a big-endian integer.
    pub fn read_uint(&mut self, width: usize) -> u64 {
        (0..width).fold(0u64, |acc, _| acc << 1 | self.read_bit() as u64)
    }

    /// Real bits consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Padding bits handed out after exhaustion.
    pub fn padding_used(&self) -> usize {
        self.padding
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_round_trip_keeps_odd_length() {
        let b = BitString::parse_binary("1011001").unwrap();
        assert_eq!(b.to_hex(), "b2");
        assert_eq!(BitString::from_hex("b2", 7).unwrap(), b);
        assert_eq!(
            BitString::from_hex("b2", 9),
            Err(BitsError::LengthExceedsPayload {
                len: 9,
                available: 8
            })
        );
    }

    #[test]
    fn reader_pads_with_zero() {
        let b = BitString::parse_binary("1").unwrap();
        let mut r = b.reader();
        assert!(r.read_bit());
        assert!(!r.read_bit());
        assert!(!r.read_bit());
        assert_eq!(r.position(), 1);
        assert_eq!(r.padding_used(), 2);
        assert!(r.is_exhausted());
    }

    #[test]
    fn uint_big_endian() {
        let b = BitString::from_uint(0b10, 2);
        assert_eq!(b.to_string(), "10");
        assert_eq!(b.read_uint(0, 2), Some(2));
        assert_eq!(BitString::from_uint(9, 32).read_uint(0, 32), Some(9));
        assert_eq!(b.read_uint(1, 2), None);
    }

    proptest! {
        #[test]
        fn byte_and_hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let b = BitString::from_bools(bits);
            let via_bytes = BitString::from_bytes(&b.to_bytes(), b.len()).unwrap();
            prop_assert_eq!(&via_bytes, &b);
            let via_hex = BitString::from_hex(&b.to_hex(), b.len()).unwrap();
            prop_assert_eq!(via_hex, b);
        }
    }
}

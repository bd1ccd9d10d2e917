//! Finite bitstrings, most significant bit first.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Bits {
    bits: Vec<bool>,
}

impl Bits {
    pub fn empty() -> Self {
        Bits { bits: Vec::new() }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Bits { bits }
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_u128(value: u128, width: usize) -> Self {
        let bits = (0..width)
            .rev()
            .map(|i| i < 128 && (value >> i) & 1 == 1)
            .collect();
        Bits { bits }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for b in bytes {
            for i in (0..8).rev() {
                bits.push((b >> i) & 1 == 1);
            }
        }
        Bits { bits }
    }

    pub fn zeros(width: usize) -> Self {
        Bits { bits: vec![false; width] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    /// Numeric value, or `None` if wider than 128 bits after stripping leading zeros.
    pub fn to_u128(&self) -> Option<u128> {
        let first_one = self.bits.iter().position(|b| *b).unwrap_or(self.bits.len());
        if self.bits.len() - first_one > 128 {
            return None;
        }
        Some(
            self.bits[first_one..]
                .iter()
                .fold(0u128, |acc, b| (acc << 1) | u128::from(*b)),
        )
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Bits { bits }
    }

    pub fn slice(&self, start: usize, len: usize) -> Bits {
        let end = (start + len).min(self.bits.len());
        let start = start.min(end);
        Bits { bits: self.bits[start..end].to_vec() }
    }

    pub fn starts_with(&self, prefix: &Bits) -> bool {
        self.bits.starts_with(&prefix.bits)
    }

    /// Keeps at most `max` leading bits.
    pub fn truncate(&self, max: usize) -> Bits {
        self.slice(0, max)
    }

    /// Splits into `chunk`-bit cells. The final cell may be shorter; its value is
    /// the numeric value of the remaining bits.
    pub fn cells(&self, chunk: usize) -> Vec<u128> {
        self.bits
            .chunks(chunk)
            .map(|c| c.iter().fold(0u128, |acc, b| (acc << 1) | u128::from(*b)))
            .collect()
    }

    /// Inverse of [`Bits::cells`] given the total bit length.
    pub fn from_cells(cells: &[u128], chunk: usize, len: usize) -> Bits {
        let mut out = Vec::with_capacity(len);
        for (i, c) in cells.iter().enumerate() {
            let take = chunk.min(len.saturating_sub(i * chunk));
            if take == 0 {
                break;
            }
            out.extend(Bits::from_u128(*c, take).bits);
        }
        Bits { bits: out }
    }

    /// Cell `idx` of the `chunk`-bit split; zero past the end.
    pub fn cell(&self, idx: usize, chunk: usize) -> u128 {
        self.slice(idx * chunk, chunk)
            .bits
            .iter()
            .fold(0u128, |acc, b| (acc << 1) | u128::from(*b))
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        let n = self.len().max(other.len());
        let a = self.pad_to(n);
        let b = other.pad_to(n);
        Bits { bits: a.bits.iter().zip(&b.bits).map(|(x, y)| x ^ y).collect() }
    }

    /// Right-pads with zeros up to `n` bits.
    pub fn pad_to(&self, n: usize) -> Bits {
        let mut bits = self.bits.clone();
        if bits.len() < n {
            bits.resize(n, false);
        }
        Bits { bits }
    }

    pub fn to_hex(&self) -> String {
        if !self.bits.len().is_multiple_of(4) {
            let s: String = self.bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
            return format!("0b{s}");
        }
        let mut s = String::from("0x");
        for nib in self.bits.chunks(4) {
            let v = nib.iter().fold(0u32, |acc, b| (acc << 1) | u32::from(*b));
            s.push(char::from_digit(v, 16).unwrap());
        }
        s
    }

    /// Parses `0x..` (four bits per digit) or `0b..` literals. An empty `0x` is the empty string.
    pub fn parse(s: &str) -> Option<Bits> {
        if let Some(hex) = s.strip_prefix("0x") {
            let mut bits = Vec::with_capacity(hex.len() * 4);
            for ch in hex.chars() {
                let v = ch.to_digit(16)?;
                for i in (0..4).rev() {
                    bits.push((v >> i) & 1 == 1);
                }
            }
            Some(Bits { bits })
        } else if let Some(bin) = s.strip_prefix("0b") {
            bin.chars()
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(|bits| Bits { bits })
        } else {
            None
        }
    }

    /// All bitstrings of length `n`, in numeric order.
    pub fn all_of_width(n: usize) -> impl Iterator<Item = Bits> {
        assert!(n < 64, "enumeration width too large");
        (0..(1u64 << n)).map(move |v| Bits::from_u128(u128::from(v), n))
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

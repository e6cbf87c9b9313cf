//! Finite binary strings, written as `0`/`1` text.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("`{0}` is not a binary string")]
pub struct BitsParseError(pub String);

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    /// The `len` low bits of `code`, most significant first.
    pub fn from_code(code: u64, len: usize) -> Self {
        BitString((0..len).map(|k| (code >> (len - 1 - k)) & 1 == 1).collect())
    }

    /// Inverse of [`BitString::from_code`]; only meaningful for `len ≤ 64`.
    pub fn code(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit `k`; positions past the end read as `0`.
    pub fn bit(&self, k: usize) -> bool {
        self.0.get(k).copied().unwrap_or(false)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn restrict(&self, k: usize) -> BitString {
        BitString(self.0[..k.min(self.0.len())].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn appended(&self, bit: bool) -> BitString {
        let mut v = self.0.clone();
        v.push(bit);
        BitString(v)
    }

    /// Drops trailing zeros.
    pub fn trimmed(mut self) -> BitString {
        while self.0.last() == Some(&false) {
            self.0.pop();
        }
        self
    }

    /// All strings of length `len` in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        (0..1u64 << len).map(move |c| BitString::from_code(c, len))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = BitsParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(BitsParseError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        String::deserialize(de)?.parse().map_err(D::Error::custom)
    }
}

//! Coalitions over a fixed, ordered set of parts.
//!
//! A coalition is a bit-set: bit `k` is set when part `k` is present. The
//! empty coalition has index 0 and the full coalition has index `2^K - 1`.

use std::fmt;

use crate::error::{Error, Result};

/// Largest part count accepted for exact enumeration.
pub const MAX_PARTS: usize = 24;

/// Largest part count a coalition can describe. Only the sampling
/// estimator goes beyond [`MAX_PARTS`].
pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    bits: u64,
    parts: u8,
    size: u8,
}

impl Coalition {
    pub fn new(bits: u64, parts: usize) -> Result<Self> {
        check_width(parts)?;
        if bits & !full_mask(parts) != 0 {
            return Err(Error::InvalidCoalition { bits, parts });
        }
        Ok(Self::from_parts_unchecked(bits, parts))
    }

    fn from_parts_unchecked(bits: u64, parts: usize) -> Self {
        Self {
            bits,
            parts: parts as u8,
            size: bits.count_ones() as u8,
        }
    }

    pub fn empty(parts: usize) -> Result<Self> {
        Self::new(0, parts)
    }

    pub fn full(parts: usize) -> Result<Self> {
        check_width(parts)?;
        Ok(Self::from_parts_unchecked(full_mask(parts), parts))
    }

    /// Coalition holding the listed part indices.
    pub fn from_members(members: &[usize], parts: usize) -> Result<Self> {
        check_width(parts)?;
        let mut bits = 0u64;
        for &m in members {
            if m >= parts {
                return Err(Error::PartIndexOutOfRange { index: m, parts });
            }
            bits |= 1 << m;
        }
        Ok(Self::from_parts_unchecked(bits, parts))
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    /// Index of this coalition in ascending enumeration order.
    pub fn index(self) -> usize {
        self.bits as usize
    }

    /// Width K of the part set this coalition is drawn from.
    pub fn parts(self) -> usize {
        self.parts as usize
    }

    /// Number of parts present.
    pub fn size(self) -> usize {
        self.size as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn is_full(self) -> bool {
        self.bits == full_mask(self.parts())
    }

    pub fn contains(self, part: usize) -> bool {
        part < self.parts() && self.bits & (1u64 << part) != 0
    }

    pub fn with(self, part: usize) -> Self {
        debug_assert!(part < self.parts());
        Self::from_parts_unchecked(self.bits | (1u64 << part), self.parts())
    }

    pub fn without(self, part: usize) -> Self {
        debug_assert!(part < self.parts());
        Self::from_parts_unchecked(self.bits & !(1u64 << part), self.parts())
    }

    /// Complement within the part set.
    pub fn complement(self) -> Self {
        Self::from_parts_unchecked(!self.bits & full_mask(self.parts()), self.parts())
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.bits;
        (0..self.parts()).filter(move |k| bits & (1u64 << k) != 0)
    }

    /// Presence string in part order: character `k` is `'1'` when part `k`
    /// is present. Part 0 is the leftmost character, so for parts
    /// (hair, eye, nose) the string `"101"` keeps hair and nose.
    pub fn to_presence_string(self) -> String {
        (0..self.parts())
            .map(|k| if self.contains(k) { '1' } else { '0' })
            .collect()
    }

    pub fn from_presence_string(s: &str) -> Result<Self> {
        let parts = s.chars().count();
        check_width(parts)?;
        let mut bits = 0u64;
        for (k, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1u64 << k,
                '0' => {}
                _ => return Err(Error::InvalidCoalition { bits, parts }),
            }
        }
        Ok(Self::from_parts_unchecked(bits, parts))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_presence_string())
    }
}

fn full_mask(parts: usize) -> u64 {
    if parts >= 64 {
        u64::MAX
    } else {
        (1u64 << parts) - 1
    }
}

fn check_width(parts: usize) -> Result<()> {
    if parts == 0 || parts > MAX_WIDTH {
        Err(Error::PartCountOutOfRange(parts))
    } else {
        Ok(())
    }
}

fn check_part_count(parts: usize) -> Result<()> {
    if parts == 0 || parts > MAX_PARTS {
        Err(Error::PartCountOutOfRange(parts))
    } else {
        Ok(())
    }
}

/// All `2^parts` coalitions in ascending bit-pattern order.
pub fn enumerate_coalitions(parts: usize) -> Result<Vec<Coalition>> {
    check_part_count(parts)?;
    Ok((0..1u64 << parts)
        .map(|bits| Coalition::from_parts_unchecked(bits, parts))
        .collect())
}

/// Power set of K parts with the Shapley weight table precomputed.
#[derive(Debug, Clone)]
pub struct CoalitionSpace {
    parts: usize,
    weights: Vec<f64>,
}

impl CoalitionSpace {
    pub fn new(parts: usize) -> Result<Self> {
        check_part_count(parts)?;
        let weights = (0..parts).map(|s| exact_weight(parts, s)).collect();
        Ok(Self { parts, weights })
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn len(&self) -> usize {
        1 << self.parts
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn empty(&self) -> Coalition {
        Coalition::from_parts_unchecked(0, self.parts)
    }

    pub fn full(&self) -> Coalition {
        Coalition::from_parts_unchecked(full_mask(self.parts), self.parts)
    }

    pub fn coalition(&self, bits: u64) -> Result<Coalition> {
        Coalition::new(bits, self.parts)
    }

    pub fn coalitions(&self) -> impl Iterator<Item = Coalition> + '_ {
        (0..1u64 << self.parts).map(|bits| Coalition::from_parts_unchecked(bits, self.parts))
    }

    /// Weight `s!(K-s-1)!/K!` of a coalition of size `s` that excludes the
    /// player being scored.
    pub fn weight(&self, size: usize) -> Result<f64> {
        self.weights
            .get(size)
            .copied()
            .ok_or(Error::SizeOutOfRange {
                size,
                parts: self.parts,
            })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Pairs `(S, S ∪ {part})` for every `S` not containing `part`, ordered by
    /// the bit pattern of `S`.
    pub fn marginal_pairs(&self, part: usize) -> Result<Vec<(Coalition, Coalition)>> {
        if part >= self.parts {
            return Err(Error::PartIndexOutOfRange {
                index: part,
                parts: self.parts,
            });
        }
        Ok(self.marginal_pairs_iter(part).collect())
    }

    pub(crate) fn marginal_pairs_iter(
        &self,
        part: usize,
    ) -> impl Iterator<Item = (Coalition, Coalition)> + '_ {
        let low_mask = (1u64 << part) - 1;
        (0..1u64 << (self.parts - 1)).map(move |r| {
            let without = ((r & !low_mask) << 1) | (r & low_mask);
            let s = Coalition::from_parts_unchecked(without, self.parts);
            (s, s.with(part))
        })
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// 24! needs 79 bits, so the factorials are carried in u128.
fn exact_weight(parts: usize, size: usize) -> f64 {
    let num = factorial(size) * factorial(parts - size - 1);
    let den = factorial(parts);
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

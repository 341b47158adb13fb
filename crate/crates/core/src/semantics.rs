//! Extensional meaning of concepts.
//!
//! A concept's meaning is the set of `(total, num)` pairs it maps to true.
//! Two views of that set are used: the [`FullExtension`] over every pair the
//! prompt generator can produce, and the compact [`MeaningSignature`] (truth
//! vectors at totals 25, 50 and 100) that deduplication compares.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::grammar::{Comparison, ConceptExpr};

/// Smallest total number of items a prompt mentions.
pub const MIN_TOTAL: u32 = 5;
/// Largest total number of items a prompt mentions.
pub const MAX_TOTAL: u32 = 100;
/// Totals at which signature vectors are taken, in concatenation order.
pub const SIGNATURE_TOTALS: [u32; 3] = [25, 50, 100];
/// `26 + 51 + 101`.
pub const SIGNATURE_LEN: usize = 178;
/// `sum(t + 1 for t in 5..=100)`.
pub const FULL_EXTENSION_LEN: usize = 5136;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("bit vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid hex bit string: {0}")]
    BadHex(String),
}

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bools(values: impl IntoIterator<Item = bool>) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for v in values {
            if len % 64 == 0 {
                words.push(0);
            }
            if v {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Self { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Number of positions at which the two vectors differ.
    pub fn hamming(&self, other: &Bits) -> Result<usize, SemanticsError> {
        if self.len != other.len {
            return Err(SemanticsError::LengthMismatch(self.len, other.len));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Hamming distance restricted to positions `range`.
    pub fn hamming_in(&self, other: &Bits, range: std::ops::Range<usize>) -> Result<usize, SemanticsError> {
        if self.len != other.len {
            return Err(SemanticsError::LengthMismatch(self.len, other.len));
        }
        Ok(range.filter(|&i| self.get(i) != other.get(i)).count())
    }

    /// Bits `range` packed little-endian into a `u128` (at most 128 bits).
    pub fn extract(&self, range: std::ops::Range<usize>) -> u128 {
        debug_assert!(range.len() <= 128);
        let mut out = 0u128;
        for (k, i) in range.enumerate() {
            if self.get(i) {
                out |= 1 << k;
            }
        }
        out
    }

    pub fn and_assign(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn or_assign(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Hex encoding, most significant bit of each byte first, so the hex
    /// digits read in vector order. Trailing pad bits are zero.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = (0..self.len.div_ceil(8))
            .map(|byte| {
                (0..8).fold(0u8, |acc, bit| {
                    let i = byte * 8 + bit;
                    acc << 1 | u8::from(i < self.len && self.get(i))
                })
            })
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(len: usize, text: &str) -> Result<Self, SemanticsError> {
        let bytes = hex::decode(text).map_err(|e| SemanticsError::BadHex(e.to_string()))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(SemanticsError::BadHex(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        let mut bits = Bits::zeros(len);
        for i in 0..len {
            bits.set(i, bytes[i / 8] >> (7 - i % 8) & 1 == 1);
        }
        Ok(bits)
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        write!(f, "Bits({text})")
    }
}

/// An ordered list of `(total, num)` evaluation points.
#[derive(Clone, Debug)]
pub struct Grid {
    points: Vec<(u32, u32)>,
}

impl Grid {
    /// `(n, x)` for each `n` in `totals` and `x` in `0..=n`, in that order.
    pub fn for_totals(totals: &[u32]) -> Self {
        let points = totals.iter().flat_map(|&n| (0..=n).map(move |x| (n, x))).collect();
        Self { points }
    }

    /// Every pair the prompt generator can produce.
    pub fn full() -> &'static Grid {
        static GRID: OnceLock<Grid> = OnceLock::new();
        GRID.get_or_init(|| Grid::for_totals(&(MIN_TOTAL..=MAX_TOTAL).collect::<Vec<_>>()))
    }

    /// The concatenated signature points.
    pub fn signature() -> &'static Grid {
        static GRID: OnceLock<Grid> = OnceLock::new();
        GRID.get_or_init(|| Grid::for_totals(&SIGNATURE_TOTALS))
    }

    pub fn points(&self) -> &[(u32, u32)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Truth values of `expr` at every point, by direct evaluation.
    pub fn evaluate(&self, expr: &ConceptExpr) -> Bits {
        Bits::from_bools(self.points.iter().map(|&(t, x)| expr.evaluate(t, x)))
    }
}

/// Computes extensions over a grid, memoizing each leaf comparison and
/// combining leaves with word-wide `and` / `or`.
pub struct GridEvaluator<'g> {
    grid: &'g Grid,
    leaves: HashMap<Comparison, Bits>,
}

impl<'g> GridEvaluator<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        Self {
            grid,
            leaves: HashMap::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn extension(&mut self, expr: &ConceptExpr) -> Bits {
        match expr {
            ConceptExpr::Compare(c) => self.leaf(c).clone(),
            ConceptExpr::And(a, b) => {
                let mut out = self.extension(a);
                out.and_assign(&self.extension(b));
                out
            }
            ConceptExpr::Or(a, b) => {
                let mut out = self.extension(a);
                out.or_assign(&self.extension(b));
                out
            }
        }
    }

    fn leaf(&mut self, c: &Comparison) -> &Bits {
        let grid = self.grid;
        self.leaves
            .entry(*c)
            .or_insert_with(|| Bits::from_bools(grid.points.iter().map(|&(t, x)| c.holds(t, x))))
    }
}

/// Truth value of `expr` at one pair.
pub fn evaluate(expr: &ConceptExpr, total: u32, num: u32) -> bool {
    expr.evaluate(total, num)
}

/// Truth values at a fixed total `n` for `x = 0..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionVector {
    pub n: u32,
    pub bits: Bits,
}

pub fn extension_vector(expr: &ConceptExpr, n: u32) -> ExtensionVector {
    ExtensionVector {
        n,
        bits: Bits::from_bools((0..=n).map(|x| expr.evaluate(n, x))),
    }
}

/// Extension vectors at totals 25, 50 and 100, concatenated in that order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeaningSignature(Bits);

impl MeaningSignature {
    pub fn of(expr: &ConceptExpr) -> Self {
        MeaningSignature(Grid::signature().evaluate(expr))
    }

    pub fn from_bits(bits: Bits) -> Self {
        MeaningSignature(bits)
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn from_hex(text: &str) -> Result<Self, SemanticsError> {
        Bits::from_hex(SIGNATURE_LEN, text).map(MeaningSignature)
    }
}

/// Hamming distance over all concatenated positions.
pub fn signature_distance(a: &MeaningSignature, b: &MeaningSignature) -> Result<usize, SemanticsError> {
    a.0.hamming(&b.0)
}

/// Position ranges of the per-total segments inside a signature built from `totals`.
pub fn signature_segments(totals: &[u32]) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    totals
        .iter()
        .map(|&n| {
            let range = start..start + n as usize + 1;
            start = range.end;
            range
        })
        .collect()
}

/// Hamming distance of each per-total segment (25, 50, 100).
pub fn segment_distances(a: &MeaningSignature, b: &MeaningSignature) -> Result<Vec<usize>, SemanticsError> {
    signature_segments(&SIGNATURE_TOTALS)
        .into_iter()
        .map(|range| a.0.hamming_in(&b.0, range))
        .collect()
}

/// Truth values at every `(total, num)` pair with `total` in `[5, 100]` and
/// `num` in `[0, total]`, ordered by total then num.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullExtension(Bits);

impl FullExtension {
    pub fn of(expr: &ConceptExpr) -> Self {
        FullExtension(Grid::full().evaluate(expr))
    }

    pub fn from_bits(bits: Bits) -> Self {
        debug_assert_eq!(bits.len(), FULL_EXTENSION_LEN);
        FullExtension(bits)
    }

    /// Position of `(total, num)` in the vector.
    #[inline]
    pub fn index(total: u32, num: u32) -> usize {
        debug_assert!((MIN_TOTAL..=MAX_TOTAL).contains(&total) && num <= total);
        // Entries for totals MIN_TOTAL..total: sum of (t + 1).
        let before = (total * (total + 1) - MIN_TOTAL * (MIN_TOTAL + 1)) / 2;
        (before + num) as usize
    }

    pub fn get(&self, total: u32, num: u32) -> bool {
        self.0.get(Self::index(total, num))
    }

    pub fn positives(&self) -> usize {
        self.0.count_ones()
    }

    pub fn negatives(&self) -> usize {
        self.0.len() - self.0.count_ones()
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_expression;

    fn expr(text: &str) -> ConceptExpr {
        parse_expression(text).unwrap()
    }

    #[test]
    fn evaluates_listed_points() {
        let gt3 = expr("(x > 3)");
        assert!(evaluate(&gt3, 100, 4));
        assert!(!evaluate(&gt3, 100, 0));
        assert!(evaluate(&expr("(x < 1/2 * n)"), 99, 3));
    }

    #[test]
    fn extension_vector_prefix() {
        let v = extension_vector(&expr("(x > 3)"), 100);
        assert_eq!(v.bits.len(), 101);
        let prefix: Vec<bool> = v.bits.iter().take(6).collect();
        assert_eq!(prefix, [false, false, false, false, true, true]);

        let eq0 = extension_vector(&expr("(x == 0)"), 25);
        assert_eq!(eq0.bits.count_ones(), 1);
        assert!(eq0.bits.get(0));
    }

    #[test]
    fn redundant_conjunct_has_same_vectors() {
        for n in [6, 25, 50, 100] {
            assert_eq!(
                extension_vector(&expr("(x < 5)"), n),
                extension_vector(&expr("((x < 5) and (x < 6))"), n)
            );
        }
    }

    #[test]
    fn signature_distances() {
        let gt5 = MeaningSignature::of(&expr("(x > 5)"));
        let gt5_not7 = MeaningSignature::of(&expr("((x > 5) and (x != 7))"));
        assert_eq!(gt5.len(), SIGNATURE_LEN);
        assert_eq!(signature_distance(&gt5, &gt5).unwrap(), 0);
        assert_eq!(segment_distances(&gt5, &gt5_not7).unwrap(), [1, 1, 1]);
        assert_eq!(signature_distance(&gt5, &gt5_not7).unwrap(), 3);
        let lt5 = MeaningSignature::of(&expr("(x < 5)"));
        assert_eq!(signature_distance(&lt5, &gt5).unwrap(), 175);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = MeaningSignature::from_bits(Bits::zeros(10));
        let b = MeaningSignature::from_bits(Bits::zeros(11));
        assert_eq!(signature_distance(&a, &b), Err(SemanticsError::LengthMismatch(10, 11)));
    }

    #[test]
    fn full_extension_layout() {
        assert_eq!(Grid::full().len(), FULL_EXTENSION_LEN);
        for (i, &(t, x)) in Grid::full().points().iter().enumerate() {
            assert_eq!(FullExtension::index(t, x), i);
        }
        let eq0 = FullExtension::of(&expr("(x == 0)"));
        assert_eq!(eq0.positives(), 96);
        assert_eq!(eq0.negatives(), 5040);
    }

    #[test]
    fn grid_evaluator_matches_direct_evaluation() {
        let grid = Grid::full();
        let mut eval = GridEvaluator::new(grid);
        for text in [
            "((x > 5) and (x != 7))",
            "(((x < 1/3 * n) or (x == 50)) and (x > 2/3 * n))",
            "((x < 10) or ((x > 90) and (x < 3/4 * n)))",
        ] {
            let e = expr(text);
            assert_eq!(eval.extension(&e), grid.evaluate(&e), "{text}");
        }
    }

    #[test]
    fn hex_round_trip() {
        let sig = MeaningSignature::of(&expr("((x > 5) and (x != 7))"));
        let text = sig.to_hex();
        assert_eq!(text.len(), 2 * SIGNATURE_LEN.div_ceil(8));
        // x = 0..7 at n = 25: 0000 0010
        assert!(text.starts_with("02"));
        assert_eq!(MeaningSignature::from_hex(&text).unwrap(), sig);
        assert!(MeaningSignature::from_hex("zz").is_err());
    }
}

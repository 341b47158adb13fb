//! Exhaustive enumeration of complexity classes.
//!
//! Class `k` holds every canonical expression with exactly `k` operators.
//! Leaves cost 1 (`x < c`) or 2 (`x < f * n`); an `and` / `or` node costs 1
//! plus its children, so class `k` is built from pairs of smaller classes
//! whose costs sum to `k - 1`.
//!
//! Integer constants range over `0..=100` in steps of a stride. Class sizes
//! grow multiplicatively with `k`, so higher classes use a coarser stride.

use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grammar::{CompareOp, ConceptExpr, NumericTerm, FRACTIONS, MAX_CONSTANT};
use crate::seeds;
use crate::semantics::MeaningSignature;

pub const MIN_CLASS: u8 = 1;
pub const MAX_CLASS: u8 = 5;
pub const DEFAULT_CLASS_CAP: u64 = 10_000_000;
pub const DEFAULT_SAMPLE_COUNT: usize = 18;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("complexity class {0} is outside {MIN_CLASS}..={MAX_CLASS}")]
    ClassOutOfRange(u8),
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("class {k} would hold {size} expressions at stride {stride}, above the cap of {cap}; use a coarser stride")]
    ResourceLimit { k: u8, stride: u8, size: u128, cap: u64 },
    #[error("class {k} has {available} eligible concepts, {wanted} requested")]
    InsufficientConcepts { k: u8, wanted: usize, available: usize },
}

/// Stable identifier: the first 8 bytes of SHA-256 over the canonical text, in hex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub String);

impl ConceptId {
    pub fn of_text(canonical_text: &str) -> Self {
        let digest = Sha256::digest(canonical_text.as_bytes());
        ConceptId(hex::encode(&digest[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ConceptId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptStatus {
    Raw,
    Retained,
    DiscardedDuplicate,
    DiscardedSimilar,
    DiscardedIneligible,
}

impl ConceptStatus {
    pub fn is_discarded(self) -> bool {
        matches!(
            self,
            ConceptStatus::DiscardedDuplicate | ConceptStatus::DiscardedSimilar | ConceptStatus::DiscardedIneligible
        )
    }
}

#[derive(Clone, Debug)]
pub struct Concept {
    pub id: ConceptId,
    pub expr: ConceptExpr,
    /// Canonical rendered text of `expr`.
    pub text: String,
    pub complexity: u8,
    pub status: ConceptStatus,
    /// Memoized by deduplication.
    pub signature: Option<MeaningSignature>,
}

impl Concept {
    /// Wraps an already-canonical expression.
    pub fn new(expr: ConceptExpr) -> Self {
        let text = expr.render();
        Self::with_text(expr, text)
    }

    fn with_text(expr: ConceptExpr, text: String) -> Self {
        let complexity = u8::try_from(expr.count_operators()).unwrap_or(u8::MAX);
        Self {
            id: ConceptId::of_text(&text),
            expr,
            text,
            complexity,
            status: ConceptStatus::Raw,
            signature: None,
        }
    }

    pub fn record(&self) -> ConceptRecord {
        ConceptRecord {
            id: self.id.clone(),
            class: self.complexity,
            expr_text: self.text.clone(),
            status: self.status,
            signature: self.signature.as_ref().map(MeaningSignature::to_hex),
        }
    }
}

/// One line of `concepts_class{k}.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub id: ConceptId,
    pub class: u8,
    pub expr_text: String,
    pub status: ConceptStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ConceptClass {
    pub k: u8,
    /// Stride of the integer constants used to build this class.
    pub stride: u8,
    /// Members sorted by canonical text.
    pub concepts: Vec<Concept>,
    pub generation_seed: u64,
}

impl ConceptClass {
    pub fn retained(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter().filter(|c| c.status == ConceptStatus::Retained)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationOptions {
    /// Stride of integer constants for classes 1 and 2.
    pub stride_low: u8,
    /// Stride of integer constants for classes 3 and up.
    pub stride_high: u8,
    /// Largest class size that may be materialized.
    pub cap: u64,
    /// Master seed; each class derives its own sampling seed from it.
    pub seed: u64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            stride_low: 1,
            stride_high: 5,
            cap: DEFAULT_CLASS_CAP,
            seed: 0,
        }
    }
}

impl EnumerationOptions {
    pub fn stride_for(&self, k: u8) -> u8 {
        if k <= 2 {
            self.stride_low
        } else {
            self.stride_high
        }
    }
}

fn constants(stride: u8) -> impl Iterator<Item = u8> {
    (0..=MAX_CONSTANT).step_by(usize::from(stride))
}

/// Number of expressions in class `k` at the given stride, without building them.
pub fn class_size(k: u8, stride: u8) -> u128 {
    let mut sizes = vec![0u128; usize::from(k) + 1];
    for c in 1..=usize::from(k) {
        sizes[c] = leaf_count(c, stride);
        for c1 in 1..c - 1 {
            let c2 = c - 1 - c1;
            if c1 < c2 {
                sizes[c] += 2 * sizes[c1] * sizes[c2];
            } else if c1 == c2 {
                sizes[c] += 2 * sizes[c1] * (sizes[c1] + 1) / 2;
            }
        }
    }
    sizes[usize::from(k)]
}

fn leaf_count(cost: usize, stride: u8) -> u128 {
    match cost {
        1 => 4 * constants(stride).count() as u128,
        2 => 2 * FRACTIONS.len() as u128,
        _ => 0,
    }
}

type Level = Vec<(Arc<ConceptExpr>, Arc<str>)>;

fn leaves(cost: usize, stride: u8) -> Level {
    let mut out: Vec<ConceptExpr> = Vec::new();
    match cost {
        1 => {
            for op in CompareOp::ALL {
                for c in constants(stride) {
                    out.push(ConceptExpr::compare(op, NumericTerm::Int(c)).expect("constant within range"));
                }
            }
        }
        2 => {
            for op in [CompareOp::Gt, CompareOp::Lt] {
                for f in FRACTIONS {
                    out.push(ConceptExpr::compare(op, NumericTerm::Scaled(f)).expect("ordering op"));
                }
            }
        }
        _ => {}
    }
    out.into_iter()
        .map(|e| {
            let text: Arc<str> = e.render().into();
            (Arc::new(e), text)
        })
        .collect()
}

/// Enumerates every canonical expression with exactly `k` operators.
pub fn enumerate_class(k: u8, options: &EnumerationOptions) -> Result<ConceptClass, EnumerationError> {
    if !(MIN_CLASS..=MAX_CLASS).contains(&k) {
        return Err(EnumerationError::ClassOutOfRange(k));
    }
    let stride = options.stride_for(k);
    if stride == 0 {
        return Err(EnumerationError::ZeroStride);
    }
    let size = class_size(k, stride);
    if size > u128::from(options.cap) {
        return Err(EnumerationError::ResourceLimit {
            k,
            stride,
            size,
            cap: options.cap,
        });
    }

    let k = usize::from(k);
    let mut levels: Vec<Level> = vec![Vec::new()];
    for cost in 1..k {
        let level = build_level(cost, stride, &levels);
        levels.push(level);
    }

    let mut concepts: Vec<Concept> = Vec::with_capacity(size as usize);
    let mut push = |expr: ConceptExpr, text: String| concepts.push(Concept::with_text(expr, text));
    for (expr, text) in leaves(k, stride) {
        push((*expr).clone(), text.to_string());
    }
    for_each_pair(k, &levels, |a, b| {
        push(
            ConceptExpr::And(Arc::clone(&a.0), Arc::clone(&b.0)),
            format!("({} and {})", a.1, b.1),
        );
        push(
            ConceptExpr::Or(Arc::clone(&a.0), Arc::clone(&b.0)),
            format!("({} or {})", a.1, b.1),
        );
    });
    concepts.sort_unstable_by(|a, b| a.text.cmp(&b.text));
    concepts.dedup_by(|a, b| a.text == b.text);

    let k = k as u8;
    Ok(ConceptClass {
        k,
        stride,
        concepts,
        generation_seed: seeds::derive(options.seed, &format!("class{k}")),
    })
}

fn build_level(cost: usize, stride: u8, levels: &[Level]) -> Level {
    let mut level = leaves(cost, stride);
    for_each_pair(cost, levels, |a, b| {
        level.push((
            Arc::new(ConceptExpr::And(Arc::clone(&a.0), Arc::clone(&b.0))),
            format!("({} and {})", a.1, b.1).into(),
        ));
        level.push((
            Arc::new(ConceptExpr::Or(Arc::clone(&a.0), Arc::clone(&b.0))),
            format!("({} or {})", a.1, b.1).into(),
        ));
    });
    level.sort_unstable_by(|a, b| a.1.cmp(&b.1));
    level
}

type Item = (Arc<ConceptExpr>, Arc<str>);

/// Calls `f(a, b)` for every unordered pair of subtrees whose costs sum to
/// `cost - 1`, with `a` rendering no later than `b`.
fn for_each_pair(cost: usize, levels: &[Level], mut f: impl FnMut(&Item, &Item)) {
    if cost < 3 {
        return;
    }
    let budget = cost - 1;
    for c1 in 1..=budget / 2 {
        let c2 = budget - c1;
        let (left, right) = (&levels[c1], &levels[c2]);
        if c1 == c2 {
            for (i, a) in left.iter().enumerate() {
                for b in &left[i..] {
                    f(a, b);
                }
            }
        } else {
            for a in left {
                for b in right {
                    if a.1 <= b.1 {
                        f(a, b);
                    } else {
                        f(b, a);
                    }
                }
            }
        }
    }
}

/// Uniformly samples `count` retained concepts without replacement,
/// returned in canonical order.
pub fn sample_concepts(class: &ConceptClass, count: usize, seed: u64) -> Result<Vec<Concept>, EnumerationError> {
    let eligible: Vec<&Concept> = class.retained().collect();
    if eligible.len() < count {
        return Err(EnumerationError::InsufficientConcepts {
            k: class.k,
            wanted: count,
            available: eligible.len(),
        });
    }
    let mut picks = index::sample(&mut seeds::rng(seed), eligible.len(), count).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|i| eligible[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn texts(class: &ConceptClass) -> Vec<&str> {
        class.concepts.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn class_one_and_two_contents() {
        let opts = EnumerationOptions::default();
        let one = enumerate_class(1, &opts).unwrap();
        assert!(texts(&one).contains(&"(x < 5)"));
        assert_eq!(one.concepts.len(), 404);
        let two = enumerate_class(2, &opts).unwrap();
        assert!(texts(&two).contains(&"(x < 1/2 * n)"));
        assert_eq!(two.concepts.len(), 18);
    }

    #[test]
    fn predicted_sizes_match_enumeration() {
        let opts = EnumerationOptions {
            stride_low: 1,
            stride_high: 10,
            ..Default::default()
        };
        for k in 1..=4 {
            let class = enumerate_class(k, &opts).unwrap();
            assert_eq!(class.concepts.len() as u128, class_size(k, opts.stride_for(k)), "k={k}");
        }
    }

    #[test]
    fn members_are_sorted_unique_and_sized() {
        let opts = EnumerationOptions::default();
        for k in 1..=3 {
            let class = enumerate_class(k, &opts).unwrap();
            let t = texts(&class);
            assert!(t.windows(2).all(|w| w[0] < w[1]), "class {k} not strictly sorted");
            assert!(class.concepts.iter().all(|c| c.complexity == k && c.expr.count_operators() == usize::from(k)));
            let ids: BTreeSet<_> = class.concepts.iter().map(|c| &c.id).collect();
            assert_eq!(ids.len(), class.concepts.len());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let opts = EnumerationOptions {
            stride_high: 1,
            ..Default::default()
        };
        match enumerate_class(5, &opts) {
            Err(EnumerationError::ResourceLimit { k: 5, stride: 1, .. }) => {}
            other => panic!("expected a resource limit, got {:?}", other.map(|c| c.concepts.len())),
        }
        assert_eq!(enumerate_class(6, &opts).unwrap_err(), EnumerationError::ClassOutOfRange(6));
        assert_eq!(enumerate_class(0, &opts).unwrap_err(), EnumerationError::ClassOutOfRange(0));
    }

    fn retained_class(n: usize) -> ConceptClass {
        let mut class = enumerate_class(1, &EnumerationOptions::default()).unwrap();
        class.concepts.truncate(n);
        for c in &mut class.concepts {
            c.status = ConceptStatus::Retained;
        }
        class
    }

    #[test]
    fn sampling_everything_returns_sorted_class() {
        let class = retained_class(18);
        let sample = sample_concepts(&class, 18, 3).unwrap();
        let got: Vec<_> = sample.iter().map(|c| c.text.clone()).collect();
        let want: Vec<_> = class.concepts.iter().map(|c| c.text.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn sampling_is_seeded() {
        let class = retained_class(200);
        let a: Vec<_> = sample_concepts(&class, 18, 11).unwrap().into_iter().map(|c| c.id).collect();
        let b: Vec<_> = sample_concepts(&class, 18, 11).unwrap().into_iter().map(|c| c.id).collect();
        let c: Vec<_> = sample_concepts(&class, 18, 12).unwrap().into_iter().map(|c| c.id).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_too_many_fails() {
        let class = retained_class(18);
        assert_eq!(
            sample_concepts(&class, 19, 0).unwrap_err(),
            EnumerationError::InsufficientConcepts {
                k: 1,
                wanted: 19,
                available: 18
            }
        );
    }
}

//! Semantic deduplication of enumerated concepts.
//!
//! Classes are processed in increasing complexity. Within a class, concepts
//! with identical signatures collapse to the first in canonical order. Across
//! classes, a concept whose signature is within Hamming distance 2 of a
//! retained concept from a simpler class is discarded, so each surviving
//! meaning keeps its shortest description. Finally, concepts with too few
//! positive or negative examples to build prompts from are set aside.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerator::{ConceptClass, ConceptId, ConceptStatus};
use crate::semantics::{signature_segments, FullExtension, Grid, GridEvaluator, MeaningSignature, SIGNATURE_TOTALS};

/// Concepts closer than this (in signature Hamming distance) are "similar".
pub const SIMILARITY_THRESHOLD: usize = 3;

/// In-context examples of each polarity per prompt.
pub const EXAMPLES_PER_POLARITY: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    /// Similar iff the distance summed over all three vectors is below the threshold.
    #[default]
    Summed,
    /// Similar iff each per-total vector is below the threshold on its own.
    PerVector,
}

impl std::str::FromStr for DedupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summed" => Ok(DedupMode::Summed),
            "per-vector" => Ok(DedupMode::PerVector),
            other => Err(format!("unknown dedup mode `{other}` (expected summed or per-vector)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DedupError {
    #[error("previous class {prev} is not simpler than class {this}")]
    OrderViolation { this: u8, prev: u8 },
    #[error("concept {0} has no signature")]
    MissingSignature(ConceptId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscardReason {
    Duplicate,
    Similar,
    Ineligible,
}

/// One line of the dedup audit log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub discarded_id: ConceptId,
    pub kept_id: Option<ConceptId>,
    pub distance: Option<usize>,
    pub reason: DiscardReason,
}

/// Fills in any missing signatures.
pub fn compute_signatures(class: &mut ConceptClass) {
    let mut eval = GridEvaluator::new(Grid::signature());
    for concept in &mut class.concepts {
        if concept.signature.is_none() {
            concept.signature = Some(MeaningSignature::from_bits(eval.extension(&concept.expr)));
        }
    }
}

fn require_signatures(class: &ConceptClass) -> Result<(), DedupError> {
    match class.concepts.iter().find(|c| c.signature.is_none()) {
        Some(c) => Err(DedupError::MissingSignature(c.id.clone())),
        None => Ok(()),
    }
}

fn is_candidate(status: ConceptStatus) -> bool {
    matches!(status, ConceptStatus::Raw | ConceptStatus::Retained)
}

/// Keeps the first concept (in canonical order) of each group of identical
/// signatures; the rest become `DiscardedDuplicate`.
pub fn dedup_within_class(class: &mut ConceptClass) -> Result<Vec<AuditEntry>, DedupError> {
    require_signatures(class)?;
    let mut first: HashMap<MeaningSignature, usize> = HashMap::new();
    let mut audit = Vec::new();
    for i in 0..class.concepts.len() {
        if !is_candidate(class.concepts[i].status) {
            continue;
        }
        let sig = class.concepts[i].signature.clone().expect("checked above");
        match first.get(&sig) {
            Some(&kept) => {
                class.concepts[i].status = ConceptStatus::DiscardedDuplicate;
                audit.push(AuditEntry {
                    discarded_id: class.concepts[i].id.clone(),
                    kept_id: Some(class.concepts[kept].id.clone()),
                    distance: Some(0),
                    reason: DiscardReason::Duplicate,
                });
            }
            None => {
                first.insert(sig, i);
                class.concepts[i].status = ConceptStatus::Retained;
            }
        }
    }
    Ok(audit)
}

/// True when two signatures count as the same meaning under `mode`.
pub fn is_similar(a: &MeaningSignature, b: &MeaningSignature, mode: DedupMode) -> Option<usize> {
    let total = a.bits().hamming(b.bits()).ok()?;
    let similar = match mode {
        DedupMode::Summed => total < SIMILARITY_THRESHOLD,
        DedupMode::PerVector => signature_segments(&SIGNATURE_TOTALS)
            .into_iter()
            .all(|r| a.bits().hamming_in(b.bits(), r).is_ok_and(|d| d < SIMILARITY_THRESHOLD)),
    };
    similar.then_some(total)
}

/// Discards every candidate in `this_class` that is similar to a retained
/// concept of a simpler class.
pub fn dedup_across_classes(
    this_class: &mut ConceptClass,
    prev_classes: &[&ConceptClass],
    mode: DedupMode,
) -> Result<Vec<AuditEntry>, DedupError> {
    if let Some(prev) = prev_classes.iter().find(|p| p.k >= this_class.k) {
        return Err(DedupError::OrderViolation {
            this: this_class.k,
            prev: prev.k,
        });
    }
    require_signatures(this_class)?;
    for prev in prev_classes {
        require_signatures(prev)?;
    }

    let kept: Vec<(&ConceptId, &MeaningSignature)> = prev_classes
        .iter()
        .flat_map(|p| p.retained())
        .map(|c| (&c.id, c.signature.as_ref().expect("checked above")))
        .collect();
    let index = NearIndex::build(kept.iter().map(|(_, s)| *s), mode);

    let mut audit = Vec::new();
    for concept in &mut this_class.concepts {
        if !is_candidate(concept.status) {
            continue;
        }
        let sig = concept.signature.as_ref().expect("checked above");
        // Earliest match among the closest ones; `kept` is in class then canonical order.
        let best = index
            .candidates(sig)
            .into_iter()
            .filter_map(|i| is_similar(sig, kept[i].1, mode).map(|d| (d, i)))
            .min();
        match best {
            Some((distance, i)) => {
                concept.status = ConceptStatus::DiscardedSimilar;
                audit.push(AuditEntry {
                    discarded_id: concept.id.clone(),
                    kept_id: Some(kept[i].0.clone()),
                    distance: Some(distance),
                    reason: DiscardReason::Similar,
                });
            }
            None => concept.status = ConceptStatus::Retained,
        }
    }
    Ok(audit)
}

/// Multi-index over signature blocks.
///
/// The indexed range is cut into four blocks. Two vectors within Hamming
/// distance 2 on that range disagree on at most two blocks, so they agree
/// exactly on at least one of the six block pairs. Looking up all six pairs
/// therefore returns a superset of the near neighbours.
struct NearIndex {
    blocks: Vec<Range<usize>>,
    tables: Vec<((usize, usize), HashMap<(u128, u128), Vec<usize>>)>,
}

impl NearIndex {
    fn build<'a>(sigs: impl Iterator<Item = &'a MeaningSignature>, mode: DedupMode) -> Self {
        let range = match mode {
            DedupMode::Summed => 0..signature_segments(&SIGNATURE_TOTALS).last().map_or(0, |r| r.end),
            // Per-vector similarity implies the n = 100 vector alone is within distance 2.
            DedupMode::PerVector => signature_segments(&SIGNATURE_TOTALS).pop().unwrap_or(0..0),
        };
        let blocks = split(range, 4);
        let mut tables: Vec<_> = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| ((a, b), HashMap::new())))
            .collect();
        for (i, sig) in sigs.enumerate() {
            for ((a, b), table) in &mut tables {
                let key = (sig.bits().extract(blocks[*a].clone()), sig.bits().extract(blocks[*b].clone()));
                table.entry(key).or_insert_with(Vec::new).push(i);
            }
        }
        Self { blocks, tables }
    }

    fn candidates(&self, sig: &MeaningSignature) -> Vec<usize> {
        let mut out = Vec::new();
        for ((a, b), table) in &self.tables {
            let key = (
                sig.bits().extract(self.blocks[*a].clone()),
                sig.bits().extract(self.blocks[*b].clone()),
            );
            if let Some(hits) = table.get(&key) {
                out.extend_from_slice(hits);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn split(range: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    let len = range.len();
    (0..parts)
        .map(|p| range.start + p * len / parts..range.start + (p + 1) * len / parts)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eligibility {
    Eligible,
    Ineligible,
}

/// Minimum number of positive and of negative pairs a concept needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityRule {
    pub min_per_polarity: usize,
}

impl Default for EligibilityRule {
    /// Ten in-context examples plus one unseen question of the same polarity.
    fn default() -> Self {
        Self {
            min_per_polarity: EXAMPLES_PER_POLARITY + 1,
        }
    }
}

pub fn filter_eligibility(extension: &FullExtension, rule: EligibilityRule) -> Eligibility {
    if extension.positives() >= rule.min_per_polarity && extension.negatives() >= rule.min_per_polarity {
        Eligibility::Eligible
    } else {
        Eligibility::Ineligible
    }
}

/// Marks retained concepts that fail `rule` as `DiscardedIneligible`.
pub fn apply_eligibility(class: &mut ConceptClass, rule: EligibilityRule) -> Vec<AuditEntry> {
    let mut eval = GridEvaluator::new(Grid::full());
    let mut audit = Vec::new();
    for concept in &mut class.concepts {
        if concept.status != ConceptStatus::Retained {
            continue;
        }
        let ext = FullExtension::from_bits(eval.extension(&concept.expr));
        if filter_eligibility(&ext, rule) == Eligibility::Ineligible {
            concept.status = ConceptStatus::DiscardedIneligible;
            audit.push(AuditEntry {
                discarded_id: concept.id.clone(),
                kept_id: None,
                distance: None,
                reason: DiscardReason::Ineligible,
            });
        }
    }
    audit
}

/// Runs the full deduplication flow over classes given in increasing `k`:
/// signatures, within-class, across-class, then eligibility.
pub fn dedup_classes(
    classes: &mut [ConceptClass],
    mode: DedupMode,
    rule: EligibilityRule,
) -> Result<Vec<AuditEntry>, DedupError> {
    let mut audit = Vec::new();
    for i in 0..classes.len() {
        let (prev, rest) = classes.split_at_mut(i);
        let this = &mut rest[0];
        compute_signatures(this);
        audit.extend(dedup_within_class(this)?);
        let prev: Vec<&ConceptClass> = prev.iter().collect();
        audit.extend(dedup_across_classes(this, &prev, mode)?);
    }
    for class in classes.iter_mut() {
        audit.extend(apply_eligibility(class, rule));
    }
    Ok(audit)
}

//! Benchmark generation and scoring for in-context concept learning.
//!
//! Concepts are small logical formulas over two counts, `n` (how many items
//! exist) and `x` (how many of them a person has). The pipeline is:
//!
//! 1. [`enumerator`]: list every formula with exactly `k` operators, `k = 1..=5`,
//!    using the typed language in [`grammar`];
//! 2. [`dedup`]: keep one shortest formula per meaning, comparing meanings
//!    through the truth vectors of [`semantics`];
//! 3. [`promptgen`]: turn sampled concepts into balanced twenty-shot prompts
//!    about the nonce word "bnik";
//! 4. [`learners`]: answer prompts (reference learners here; remote models in
//!    the client crate);
//! 5. [`stats`]: per-class accuracy and its correlation with complexity.

pub mod artifact;
pub mod dedup;
pub mod enumerator;
pub mod grammar;
pub mod learners;
pub mod promptgen;
pub mod seeds;
pub mod semantics;
pub mod stats;

pub use enumerator::{Concept, ConceptClass, ConceptId, ConceptStatus};
pub use grammar::{canonicalize, parse_expression, ConceptExpr};
pub use learners::{Answer, LearnerQuery, Prediction};

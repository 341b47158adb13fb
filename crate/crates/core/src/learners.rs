//! Learner contract and built-in reference learners.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::enumerator::Concept;
use crate::promptgen::{parse_prompt_text, Prompt, PromptError};
use crate::seeds;
use crate::semantics::{FullExtension, Grid, GridEvaluator, MAX_TOTAL, MIN_TOTAL};

/// What a learner sees for one prompt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnerQuery {
    pub in_context: Vec<((u32, u32), bool)>,
    pub question: (u32, u32),
    pub rendered_text: String,
}

impl LearnerQuery {
    pub fn from_prompt(prompt: &Prompt, rendered_text: String) -> Self {
        Self {
            in_context: prompt.examples.iter().map(|e| (e.pair(), e.label)).collect(),
            question: prompt.question.pair(),
            rendered_text,
        }
    }

    /// Recovers the structured query from rendered prompt text.
    pub fn from_text(text: &str) -> Result<Self, PromptError> {
        let parsed = parse_prompt_text(text)?;
        Ok(Self {
            in_context: parsed.examples,
            question: parsed.question,
            rendered_text: text.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Abstain,
}

impl Answer {
    pub fn from_label(label: bool) -> Self {
        if label {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Abstain => "abstain",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub answer: Answer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

impl Prediction {
    pub fn label(label: bool) -> Self {
        Self {
            answer: Answer::from_label(label),
            raw_text: None,
        }
    }

    pub fn abstain() -> Self {
        Self {
            answer: Answer::Abstain,
            raw_text: None,
        }
    }
}

/// A learner that answers prompts without external services.
pub trait Learner: Send + Sync {
    fn name(&self) -> &str;

    /// Must be a pure function of `(query, seed)`.
    fn predict(&self, query: &LearnerQuery, seed: u64) -> Prediction;
}

/// Maps free model output to an answer: the first standalone `yes` or `no`
/// token (any case) decides; anything else abstains.
pub fn parse_answer(raw_text: &str) -> Prediction {
    let answer = raw_text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|w| {
            if w.eq_ignore_ascii_case("yes") {
                Some(Answer::Yes)
            } else if w.eq_ignore_ascii_case("no") {
                Some(Answer::No)
            } else {
                None
            }
        })
        .unwrap_or(Answer::Abstain);
    Prediction {
        answer,
        raw_text: Some(raw_text.to_string()),
    }
}

/// Answers with the more frequent in-context label; a tie is a seeded coin flip.
pub fn majority_predict(query: &LearnerQuery, seed: u64) -> Prediction {
    if query.in_context.is_empty() {
        return Prediction::abstain();
    }
    let yes = query.in_context.iter().filter(|(_, l)| *l).count();
    let no = query.in_context.len() - yes;
    let label = match yes.cmp(&no) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => seeds::rng(seed).random_bool(0.5),
    };
    Prediction::label(label)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MajorityLearner;

impl Learner for MajorityLearner {
    fn name(&self) -> &str {
        "majority"
    }

    fn predict(&self, query: &LearnerQuery, seed: u64) -> Prediction {
        majority_predict(query, seed)
    }
}

struct HypothesisClass {
    complexity: u8,
    /// Canonical texts, sorted.
    texts: Vec<String>,
    /// Full extensions, `words_per` words each, in `texts` order.
    words: Vec<u64>,
}

/// Minimum-description-length learner.
///
/// Keeps the hypotheses consistent with every in-context example, restricts
/// them to the lowest complexity that has any, and lets those vote on the
/// question. Ties go to the lexicographically first hypothesis. When nothing
/// is consistent it falls back to the nearest in-context example.
pub struct MdlLearner {
    classes: Vec<HypothesisClass>,
    words_per: usize,
}

impl MdlLearner {
    pub fn new<'a>(hypotheses: impl IntoIterator<Item = &'a Concept>) -> Self {
        let mut by_class: Vec<(u8, Vec<&Concept>)> = Vec::new();
        for concept in hypotheses {
            match by_class.iter_mut().find(|(k, _)| *k == concept.complexity) {
                Some((_, list)) => list.push(concept),
                None => by_class.push((concept.complexity, vec![concept])),
            }
        }
        by_class.sort_by_key(|(k, _)| *k);

        let mut eval = GridEvaluator::new(Grid::full());
        let words_per = Grid::full().len().div_ceil(64);
        let classes = by_class
            .into_iter()
            .map(|(complexity, mut list)| {
                list.sort_by(|a, b| a.text.cmp(&b.text));
                list.dedup_by(|a, b| a.text == b.text);
                let mut words = Vec::with_capacity(list.len() * words_per);
                for c in &list {
                    words.extend_from_slice(eval.extension(&c.expr).words());
                }
                HypothesisClass {
                    complexity,
                    texts: list.iter().map(|c| c.text.clone()).collect(),
                    words,
                }
            })
            .collect();
        Self { classes, words_per }
    }

    pub fn hypothesis_count(&self) -> usize {
        self.classes.iter().map(|c| c.texts.len()).sum()
    }

    /// The minimal-complexity consistent hypotheses, as `(complexity, texts)`.
    pub fn minimal_consistent(&self, in_context: &[((u32, u32), bool)]) -> Option<(u8, Vec<&str>)> {
        let points = grid_indices(in_context.iter().map(|(p, _)| *p))?;
        for class in &self.classes {
            let hits: Vec<&str> = self
                .consistent_rows(class, in_context, &points)
                .map(|row| class.texts[row].as_str())
                .collect();
            if !hits.is_empty() {
                return Some((class.complexity, hits));
            }
        }
        None
    }

    fn consistent_rows<'s>(
        &'s self,
        class: &'s HypothesisClass,
        in_context: &'s [((u32, u32), bool)],
        points: &'s [usize],
    ) -> impl Iterator<Item = usize> + 's {
        (0..class.texts.len()).filter(move |&row| {
            let ext = &class.words[row * self.words_per..(row + 1) * self.words_per];
            points
                .iter()
                .zip(in_context)
                .all(|(&i, (_, label))| (ext[i / 64] >> (i % 64) & 1 == 1) == *label)
        })
    }

    pub fn mdl_predict(&self, query: &LearnerQuery) -> Prediction {
        let (Some(points), Some(q)) = (
            grid_indices(query.in_context.iter().map(|(p, _)| *p)),
            grid_indices(std::iter::once(query.question)),
        ) else {
            return nearest_neighbour(query);
        };
        let q = q[0];
        for class in &self.classes {
            let mut yes = 0usize;
            let mut no = 0usize;
            let mut first = None;
            for row in self.consistent_rows(class, &query.in_context, &points) {
                let ext = &class.words[row * self.words_per..(row + 1) * self.words_per];
                let vote = ext[q / 64] >> (q % 64) & 1 == 1;
                first.get_or_insert(vote);
                if vote {
                    yes += 1;
                } else {
                    no += 1;
                }
            }
            if let Some(first) = first {
                let label = match yes.cmp(&no) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => first,
                };
                return Prediction::label(label);
            }
        }
        nearest_neighbour(query)
    }
}

impl Learner for MdlLearner {
    fn name(&self) -> &str {
        "mdl"
    }

    fn predict(&self, query: &LearnerQuery, _seed: u64) -> Prediction {
        self.mdl_predict(query)
    }
}

fn grid_indices(points: impl Iterator<Item = (u32, u32)>) -> Option<Vec<usize>> {
    points
        .map(|(t, x)| ((MIN_TOTAL..=MAX_TOTAL).contains(&t) && x <= t).then(|| FullExtension::index(t, x)))
        .collect()
}

/// Label of the closest in-context point (Euclidean on `(total, num)`); on
/// equal distance a positive example wins.
pub fn nearest_neighbour(query: &LearnerQuery) -> Prediction {
    let (qt, qx) = query.question;
    let best = query
        .in_context
        .iter()
        .map(|&((t, x), label)| {
            let dt = i64::from(t) - i64::from(qt);
            let dx = i64::from(x) - i64::from(qx);
            (dt * dt + dx * dx, !label)
        })
        .min();
    match best {
        Some((_, not_label)) => Prediction::label(!not_label),
        None => Prediction::abstain(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerator::{enumerate_class, EnumerationOptions};
    use crate::grammar::parse_expression;

    fn query(pairs: &[((u32, u32), bool)], question: (u32, u32)) -> LearnerQuery {
        LearnerQuery {
            in_context: pairs.to_vec(),
            question,
            rendered_text: String::new(),
        }
    }

    #[test]
    fn parse_answer_cases() {
        assert_eq!(parse_answer("Yes.").answer, Answer::Yes);
        assert_eq!(parse_answer("no, Alice does not have bnik").answer, Answer::No);
        let p = parse_answer("It depends.");
        assert_eq!(p.answer, Answer::Abstain);
        assert_eq!(p.raw_text.as_deref(), Some("It depends."));
        assert_eq!(parse_answer("  YES").answer, Answer::Yes);
        assert_eq!(parse_answer("Nope").answer, Answer::Abstain);
        assert_eq!(parse_answer("").answer, Answer::Abstain);
        assert_eq!(parse_answer("Answer: no. Yes?").answer, Answer::No);
    }

    #[test]
    fn majority_cases() {
        let mut pairs: Vec<_> = (0..10).map(|i| ((50, i), true)).collect();
        pairs.extend((0..10).map(|i| ((60, i), false)));
        let balanced = query(&pairs, (20, 2));
        assert_eq!(majority_predict(&balanced, 3), majority_predict(&balanced, 3));
        let answers: std::collections::HashSet<_> =
            (0..32).map(|s| majority_predict(&balanced, s).answer).collect();
        assert_eq!(answers.len(), 2, "coin should land both ways across seeds");

        pairs.push(((70, 1), true));
        pairs.remove(19);
        assert_eq!(majority_predict(&query(&pairs, (20, 2)), 0).answer, Answer::Yes);
        assert_eq!(majority_predict(&query(&[], (20, 2)), 0).answer, Answer::Abstain);
    }

    #[test]
    fn nearest_neighbour_prefers_yes_on_ties() {
        let q = query(&[((20, 4), false), ((20, 6), true)], (20, 5));
        assert_eq!(nearest_neighbour(&q).answer, Answer::Yes);
        let q = query(&[((20, 4), false), ((20, 7), true)], (20, 5));
        assert_eq!(nearest_neighbour(&q).answer, Answer::No);
    }

    fn class_one_and_two() -> Vec<Concept> {
        let opts = EnumerationOptions::default();
        let mut all = enumerate_class(1, &opts).unwrap().concepts;
        all.extend(enumerate_class(2, &opts).unwrap().concepts);
        all
    }

    #[test]
    fn mdl_learns_threshold() {
        let hyps = class_one_and_two();
        let learner = MdlLearner::new(&hyps);
        let target = parse_expression("(x < 5)").unwrap();
        let pairs: Vec<_> = [(10, 0), (20, 1), (30, 2), (40, 3), (50, 4), (60, 0), (70, 1), (80, 2), (90, 3), (99, 4)]
            .into_iter()
            .chain([(10, 5), (20, 6), (30, 9), (40, 12), (50, 20), (60, 33), (70, 40), (80, 50), (90, 70), (99, 80)])
            .map(|p| (p, target.evaluate(p.0, p.1)))
            .collect();
        let q = query(&pairs, (20, 2));
        let (k, hits) = learner.minimal_consistent(&q.in_context).unwrap();
        assert_eq!((k, hits), (1, vec!["(x < 5)"]));
        assert_eq!(learner.mdl_predict(&q).answer, Answer::Yes);
    }

    #[test]
    fn mdl_learns_more_than_half() {
        let hyps = class_one_and_two();
        let learner = MdlLearner::new(&hyps);
        let target = parse_expression("(x > 1/2 * n)").unwrap();
        let pos = [(10, 6), (20, 15), (30, 16), (40, 39), (50, 26), (60, 31), (70, 60), (80, 41), (90, 46), (99, 50)];
        let neg = [(10, 5), (20, 2), (30, 15), (40, 20), (50, 25), (60, 30), (70, 35), (80, 40), (90, 45), (99, 49)];
        let pairs: Vec<_> = pos.iter().chain(&neg).map(|&p| (p, target.evaluate(p.0, p.1))).collect();
        assert!(pairs[..10].iter().all(|(_, l)| *l) && pairs[10..].iter().all(|(_, l)| !*l));
        let q = query(&pairs, (10, 9));
        assert_eq!(learner.minimal_consistent(&q.in_context).unwrap(), (2, vec!["(x > 1/2 * n)"]));
        assert_eq!(learner.mdl_predict(&q).answer, Answer::Yes);
    }

    #[test]
    fn mdl_falls_back_when_nothing_fits() {
        let hyps = vec![Concept::new(parse_expression("(x < 5)").unwrap())];
        let learner = MdlLearner::new(&hyps);
        let q = query(&[((20, 3), false), ((20, 10), true)], (20, 9));
        assert!(learner.minimal_consistent(&q.in_context).is_none());
        assert_eq!(learner.mdl_predict(&q).answer, Answer::Yes);
    }
}

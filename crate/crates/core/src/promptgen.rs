//! Labeled example pools and balanced few-shot prompts.
//!
//! For a concept, every `(total, num)` pair with `total` in `[5, 100]` and
//! `num` in `[0, total]` becomes one example sentence pair with randomly drawn
//! lexical slots. A prompt shows ten positive and ten negative examples in
//! shuffled order and then asks about one pair it has not shown.

use std::fmt;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dedup::EXAMPLES_PER_POLARITY;
use crate::enumerator::ConceptId;
use crate::grammar::ConceptExpr;
use crate::seeds;
use crate::semantics::{MAX_TOTAL, MIN_TOTAL};

pub const NONCE_WORD: &str = "bnik";
pub const INTRO: &str = "Let us define a new word, bnik.";
pub const DEFAULT_PROMPTS_PER_CONCEPT: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subject {
    Alice,
    Bob,
}

impl Subject {
    pub const ALL: [Subject; 2] = [Subject::Alice, Subject::Bob];

    pub fn word(self) -> &'static str {
        match self {
            Subject::Alice => "Alice",
            Subject::Bob => "Bob",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Predicate {
    Has,
    Owns,
}

impl Predicate {
    pub const ALL: [Predicate; 2] = [Predicate::Has, Predicate::Owns];

    /// Third-person form used in statements ("Alice has").
    pub fn inflected(self) -> &'static str {
        match self {
            Predicate::Has => "has",
            Predicate::Owns => "owns",
        }
    }

    /// Base form used after "Does" ("Does Alice have").
    pub fn base(self) -> &'static str {
        match self {
            Predicate::Has => "have",
            Predicate::Owns => "own",
        }
    }
}

pub const OBJECTS: [&str; 8] = ["tables", "chairs", "apples", "bikes", "trees", "fish", "birds", "plants"];

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub total: u32,
    pub num: u32,
    pub subject: Subject,
    pub predicate: Predicate,
    pub object: String,
    pub label: bool,
}

impl LabeledExample {
    pub fn pair(&self) -> (u32, u32) {
        (self.total, self.num)
    }

    /// "There are 17 plants. Alice has 13 of the plants."
    pub fn statement(&self) -> String {
        format!(
            "There are {} {}. {} {} {} of the {}.",
            self.total,
            self.object,
            self.subject.word(),
            self.predicate.inflected(),
            self.num,
            self.object
        )
    }

    /// "Does Alice have bnik of the plants?"
    pub fn question(&self) -> String {
        format!(
            "Does {} {} {NONCE_WORD} of the {}?",
            self.subject.word(),
            self.predicate.base(),
            self.object
        )
    }

    /// Both sentences with the answer appended.
    pub fn answered(&self) -> String {
        format!("{}\n{} {}.", self.statement(), self.question(), yes_no(self.label))
    }
}

fn yes_no(label: bool) -> &'static str {
    if label {
        "Yes"
    } else {
        "No"
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("need at least {needed} {polarity} examples, have {available}")]
    InsufficientExamples {
        polarity: Polarity,
        needed: usize,
        available: usize,
    },
    #[error("no unseen {0} example is left for the question")]
    PoolExhausted(Polarity),
    #[error("malformed prompt text at line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    fn of(label: bool) -> Self {
        if label {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

/// All labeled examples of one concept, split by label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExamplePool {
    pub positives: Vec<LabeledExample>,
    pub negatives: Vec<LabeledExample>,
}

impl ExamplePool {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn side(&self, label: bool) -> &[LabeledExample] {
        if label {
            &self.positives
        } else {
            &self.negatives
        }
    }
}

/// One example per `(total, num)` pair, with subject, predicate and object
/// drawn uniformly per example.
pub fn generate_examples(concept: &ConceptExpr, seed: u64) -> ExamplePool {
    let mut rng = seeds::rng(seed);
    let mut pool = ExamplePool {
        positives: Vec::new(),
        negatives: Vec::new(),
    };
    for total in MIN_TOTAL..=MAX_TOTAL {
        for num in 0..=total {
            let subject = *Subject::ALL.choose(&mut rng).expect("non-empty");
            let predicate = *Predicate::ALL.choose(&mut rng).expect("non-empty");
            let object = (*OBJECTS.choose(&mut rng).expect("non-empty")).to_string();
            let label = concept.evaluate(total, num);
            let example = LabeledExample {
                total,
                num,
                subject,
                predicate,
                object,
                label,
            };
            if label {
                pool.positives.push(example);
            } else {
                pool.negatives.push(example);
            }
        }
    }
    pool
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub concept_id: ConceptId,
    pub intro: String,
    pub examples: Vec<LabeledExample>,
    pub question: LabeledExample,
    pub answer: bool,
    pub render_seed: u64,
}

impl Prompt {
    /// Checks the balance and unseen-question invariants.
    pub fn validate(&self) -> Result<(), String> {
        let yes = self.examples.iter().filter(|e| e.label).count();
        let no = self.examples.len() - yes;
        if yes != EXAMPLES_PER_POLARITY || no != EXAMPLES_PER_POLARITY {
            return Err(format!("{yes} positive and {no} negative examples"));
        }
        if self.examples.iter().any(|e| e.pair() == self.question.pair()) {
            return Err("question pair appears among the examples".into());
        }
        if self.intro != INTRO {
            return Err(format!("unexpected intro {:?}", self.intro));
        }
        if self.question.label != self.answer {
            return Err("answer disagrees with question label".into());
        }
        Ok(())
    }
}

/// Samples ten positives and ten negatives, shuffles them, and picks an
/// unseen question whose answer is `answer`.
pub fn build_prompt(
    concept_id: &ConceptId,
    pool: &ExamplePool,
    answer: bool,
    seed: u64,
) -> Result<Prompt, PromptError> {
    let mut rng = seeds::rng(seed);
    check_side(pool, true, EXAMPLES_PER_POLARITY)?;
    check_side(pool, false, EXAMPLES_PER_POLARITY)?;
    let side = pool.side(answer);
    if side.len() <= EXAMPLES_PER_POLARITY {
        return Err(PromptError::PoolExhausted(Polarity::of(answer)));
    }
    // Draw the shown examples of the question's polarity plus one extra; the
    // extra is the question, which is then unseen by construction.
    let mut picks = index::sample(&mut rng, side.len(), EXAMPLES_PER_POLARITY + 1).into_vec();
    let question = side[picks.pop().expect("sampled k + 1 indices")].clone();
    let same: Vec<LabeledExample> = picks.into_iter().map(|i| side[i].clone()).collect();
    let other = sample_side(pool.side(!answer), EXAMPLES_PER_POLARITY, &mut rng, None);
    Ok(assemble(concept_id, same, other, question, seed, &mut rng))
}

/// Like [`build_prompt`], but the question is fixed by the caller and
/// excluded from the shown examples.
pub fn build_prompt_with_question(
    concept_id: &ConceptId,
    pool: &ExamplePool,
    question: &LabeledExample,
    seed: u64,
) -> Result<Prompt, PromptError> {
    let mut rng = seeds::rng(seed);
    let answer = question.label;
    check_side(pool, answer, EXAMPLES_PER_POLARITY + 1)?;
    check_side(pool, !answer, EXAMPLES_PER_POLARITY)?;
    let same = sample_side(pool.side(answer), EXAMPLES_PER_POLARITY, &mut rng, Some(question.pair()));
    let other = sample_side(pool.side(!answer), EXAMPLES_PER_POLARITY, &mut rng, None);
    Ok(assemble(concept_id, same, other, question.clone(), seed, &mut rng))
}

fn check_side(pool: &ExamplePool, label: bool, needed: usize) -> Result<(), PromptError> {
    let available = pool.side(label).len();
    if available < needed {
        return Err(PromptError::InsufficientExamples {
            polarity: Polarity::of(label),
            needed,
            available,
        });
    }
    Ok(())
}

fn sample_side(side: &[LabeledExample], k: usize, rng: &mut impl Rng, skip: Option<(u32, u32)>) -> Vec<LabeledExample> {
    let candidates: Vec<&LabeledExample> = side.iter().filter(|e| Some(e.pair()) != skip).collect();
    index::sample(rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

fn assemble(
    concept_id: &ConceptId,
    mut examples: Vec<LabeledExample>,
    other: Vec<LabeledExample>,
    question: LabeledExample,
    seed: u64,
    rng: &mut impl Rng,
) -> Prompt {
    examples.extend(other);
    examples.shuffle(rng);
    Prompt {
        concept_id: concept_id.clone(),
        intro: INTRO.to_string(),
        answer: question.label,
        examples,
        question,
        render_seed: seed,
    }
}

/// The prompt as newline-separated text; the question line has no answer.
pub fn render_prompt(prompt: &Prompt) -> String {
    let mut lines = Vec::with_capacity(2 * prompt.examples.len() + 3);
    lines.push(prompt.intro.clone());
    for example in &prompt.examples {
        lines.push(example.statement());
        lines.push(format!("{} {}.", example.question(), yes_no(example.label)));
    }
    lines.push(prompt.question.statement());
    lines.push(prompt.question.question());
    lines.join("\n")
}

/// Structured content recovered from rendered prompt text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub examples: Vec<((u32, u32), bool)>,
    pub question: (u32, u32),
}

/// Inverse of [`render_prompt`] on the numeric content.
pub fn parse_prompt_text(text: &str) -> Result<ParsedPrompt, PromptError> {
    let lines: Vec<&str> = text.lines().collect();
    let malformed = |line: usize, message: &str| PromptError::Malformed {
        line: line + 1,
        message: message.to_string(),
    };
    if lines.first().copied() != Some(INTRO) {
        return Err(malformed(0, "missing intro"));
    }
    let body = &lines[1..];
    if body.len() < 2 || !body.len().is_multiple_of(2) {
        return Err(malformed(lines.len(), "expected statement/question line pairs"));
    }
    let mut examples = Vec::new();
    let mut question = None;
    for (i, pair) in body.chunks(2).enumerate() {
        let line_no = 1 + 2 * i;
        let point = parse_statement(pair[0]).ok_or_else(|| malformed(line_no, "unrecognized statement"))?;
        let q = pair[1];
        if !q.starts_with("Does ") || !q.contains(&format!(" {NONCE_WORD} of the ")) {
            return Err(malformed(line_no + 1, "unrecognized question"));
        }
        if let Some(head) = q.strip_suffix(" Yes.") {
            examples.push((point, true));
            debug_assert!(head.ends_with('?'));
        } else if q.strip_suffix(" No.").is_some() {
            examples.push((point, false));
        } else if q.ends_with('?') && 2 * (i + 1) == body.len() {
            question = Some(point);
        } else {
            return Err(malformed(line_no + 1, "question line must end in `? Yes.`, `? No.` or, last, `?`"));
        }
    }
    let question = question.ok_or_else(|| malformed(lines.len(), "missing final question"))?;
    Ok(ParsedPrompt { examples, question })
}

fn parse_statement(line: &str) -> Option<(u32, u32)> {
    let rest = line.strip_prefix("There are ")?;
    let mut words = rest.split_whitespace();
    let total: u32 = words.next()?.parse().ok()?;
    words.next()?; // object
    words.next()?; // subject
    words.next()?; // predicate
    let num: u32 = words.next()?.parse().ok()?;
    Some((total, num))
}

/// One line of `prompts_{concept_id}.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub concept_id: ConceptId,
    pub prompt_index: usize,
    pub text: String,
    pub answer: bool,
    pub question_total: u32,
    pub question_num: u32,
    pub seed: u64,
}

/// All prompts for one concept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptSet {
    pub concept_id: ConceptId,
    pub prompts: Vec<Prompt>,
    /// Positive in-context examples per prompt.
    pub m: usize,
    /// Negative in-context examples per prompt.
    pub n: usize,
    /// Whether positive (resp. negative) question pairs had to be reused
    /// because the pool ran out of distinct ones.
    pub reused_positive_questions: bool,
    pub reused_negative_questions: bool,
}

impl PromptSet {
    pub fn records(&self) -> Vec<PromptRecord> {
        self.prompts
            .iter()
            .enumerate()
            .map(|(i, p)| PromptRecord {
                concept_id: p.concept_id.clone(),
                prompt_index: i,
                text: render_prompt(p),
                answer: p.answer,
                question_total: p.question.total,
                question_num: p.question.num,
                seed: p.render_seed,
            })
            .collect()
    }
}

/// Builds `count` prompts (even indices answer yes, odd indices no) from a
/// stream seeded by `(master_seed, concept_id)`.
///
/// Question pairs of each polarity are drawn without replacement until that
/// side of the pool runs out, then with replacement; a prompt never shows its
/// own question pair.
pub fn build_prompt_set(
    concept_id: &ConceptId,
    concept: &ConceptExpr,
    master_seed: u64,
    count: usize,
) -> Result<PromptSet, PromptError> {
    if !count.is_multiple_of(2) {
        return Err(PromptError::InsufficientExamples {
            polarity: Polarity::Negative,
            needed: count / 2 + 1,
            available: count / 2,
        });
    }
    let concept_seed = seeds::derive(master_seed, concept_id.as_str());
    let pool = generate_examples(concept, seeds::derive(concept_seed, "pool"));
    for label in [true, false] {
        check_side(&pool, label, EXAMPLES_PER_POLARITY)?;
        if pool.side(label).len() <= EXAMPLES_PER_POLARITY {
            return Err(PromptError::PoolExhausted(Polarity::of(label)));
        }
    }

    let mut reuse = [false, false];
    let mut schedules = Vec::new();
    for (slot, label) in [true, false].into_iter().enumerate() {
        let side = pool.side(label);
        let wanted = count / 2;
        let mut rng = seeds::rng(seeds::derive(concept_seed, if label { "questions-yes" } else { "questions-no" }));
        let mut order: Vec<usize> = (0..side.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(wanted);
        while order.len() < wanted {
            reuse[slot] = true;
            order.push(rng.random_range(0..side.len()));
        }
        schedules.push(order);
    }

    let mut prompts = Vec::with_capacity(count);
    for i in 0..count {
        let label = i % 2 == 0;
        let question = &pool.side(label)[schedules[usize::from(!label)][i / 2]];
        let seed = seeds::derive(concept_seed, &format!("prompt{i}"));
        prompts.push(build_prompt_with_question(concept_id, &pool, question, seed)?);
    }
    Ok(PromptSet {
        concept_id: concept_id.clone(),
        prompts,
        m: EXAMPLES_PER_POLARITY,
        n: EXAMPLES_PER_POLARITY,
        reused_positive_questions: reuse[0],
        reused_negative_questions: reuse[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_expression;

    fn expr(text: &str) -> ConceptExpr {
        parse_expression(text).unwrap()
    }

    #[test]
    fn pool_covers_every_pair() {
        let pool = generate_examples(&expr("(x < 1/2 * n)"), 1);
        assert_eq!(pool.len(), 5136);
        let eq0 = generate_examples(&expr("(x == 0)"), 1);
        assert_eq!(eq0.positives.len(), 96);
        assert_eq!(generate_examples(&expr("(x == 0)"), 1), eq0);
        assert_ne!(generate_examples(&expr("(x == 0)"), 2), eq0);
    }

    #[test]
    fn answered_example_text() {
        let e = LabeledExample {
            total: 17,
            num: 13,
            subject: Subject::Alice,
            predicate: Predicate::Has,
            object: "plants".into(),
            label: false,
        };
        assert_eq!(e.answered(), "There are 17 plants. Alice has 13 of the plants.\nDoes Alice have bnik of the plants? No.");
        let owns = LabeledExample {
            total: 40,
            num: 36,
            predicate: Predicate::Owns,
            object: "tables".into(),
            ..e
        };
        assert!(owns.answered().ends_with("Does Alice own bnik of the tables? No."));
    }

    #[test]
    fn prompt_is_balanced_with_unseen_question() {
        let id = ConceptId("test".into());
        let pool = generate_examples(&expr("(x < 1/2 * n)"), 5);
        for answer in [true, false] {
            let p = build_prompt(&id, &pool, answer, 9).unwrap();
            p.validate().unwrap();
            assert_eq!(p.answer, answer);
            let text = render_prompt(&p);
            assert!(text.starts_with(INTRO));
            assert_eq!(text.matches("? Yes.").count(), 10);
            assert_eq!(text.matches("? No.").count(), 10);
            assert!(text.ends_with('?'));
            let parsed = parse_prompt_text(&text).unwrap();
            assert_eq!(parsed.question, p.question.pair());
            assert_eq!(parsed.examples.len(), 20);
        }
    }

    #[test]
    fn exactly_ten_positives_exhausts_question_side() {
        let id = ConceptId("eq91".into());
        let pool = generate_examples(&expr("(x == 91)"), 0);
        assert_eq!(pool.positives.len(), 10);
        assert_eq!(build_prompt(&id, &pool, true, 0), Err(PromptError::PoolExhausted(Polarity::Positive)));
        assert!(build_prompt(&id, &pool, false, 0).is_ok());
        let pool = generate_examples(&expr("(x == 100)"), 0);
        assert!(matches!(
            build_prompt(&id, &pool, false, 0),
            Err(PromptError::InsufficientExamples { polarity: Polarity::Positive, .. })
        ));
    }

    #[test]
    fn prompt_set_balance_and_determinism() {
        let id = ConceptId("half".into());
        let e = expr("(x < 1/2 * n)");
        let set = build_prompt_set(&id, &e, 7, 40).unwrap();
        assert_eq!(set.prompts.len(), 40);
        assert_eq!(set.prompts.iter().filter(|p| p.answer).count(), 20);
        assert!(!set.reused_positive_questions);
        for p in &set.prompts {
            p.validate().unwrap();
            assert_eq!(p.question.label, e.evaluate(p.question.total, p.question.num));
        }
        assert_eq!(build_prompt_set(&id, &e, 7, 40).unwrap(), set);
        assert_ne!(build_prompt_set(&id, &e, 8, 40).unwrap(), set);
    }

    #[test]
    fn small_sides_reuse_questions() {
        // x == 80 has 21 positives: 50 yes-questions must repeat.
        let set = build_prompt_set(&ConceptId("eq80".into()), &expr("(x == 80)"), 1, 100).unwrap();
        assert!(set.reused_positive_questions);
        assert!(!set.reused_negative_questions);
        for p in &set.prompts {
            p.validate().unwrap();
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_prompt_text("hello").is_err());
        assert!(parse_prompt_text(&format!("{INTRO}\nThere are 5 fish. Bob has 2 of the fish.")).is_err());
    }
}

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use conceptbench_core::dedup::{
    dedup_across_classes, dedup_classes, filter_eligibility, compute_signatures, DedupMode, Eligibility, EligibilityRule,
};
use conceptbench_core::enumerator::{enumerate_class, Concept, ConceptClass, ConceptId, ConceptStatus, EnumerationOptions};
use conceptbench_core::grammar::{CompareOp, NumericTerm, FRACTIONS};
use conceptbench_core::learners::{parse_answer, Answer, Prediction};
use conceptbench_core::promptgen::{build_prompt_set, parse_prompt_text};
use conceptbench_core::semantics::{signature_distance, FullExtension, Grid, GridEvaluator, MeaningSignature};
use conceptbench_core::stats::{concept_accuracy, pearson, summarize, AbstainPolicy, EvalRecord};
use conceptbench_core::{canonicalize, parse_expression, ConceptExpr};

fn leaf() -> impl Strategy<Value = ConceptExpr> {
    prop_oneof![
        (prop::sample::select(CompareOp::ALL.to_vec()), 0u8..=100)
            .prop_map(|(op, c)| ConceptExpr::compare(op, NumericTerm::Int(c)).unwrap()),
        (
            prop::sample::select(vec![CompareOp::Gt, CompareOp::Lt]),
            prop::sample::select(FRACTIONS.to_vec())
        )
            .prop_map(|(op, f)| ConceptExpr::compare(op, NumericTerm::Scaled(f)).unwrap()),
    ]
}

fn expr() -> impl Strategy<Value = ConceptExpr> {
    leaf().prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| ConceptExpr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| ConceptExpr::or(a, b)),
        ]
    })
}

fn class_of(k: u8, exprs: Vec<ConceptExpr>) -> ConceptClass {
    let by_text: BTreeMap<String, Concept> = exprs
        .into_iter()
        .map(|e| Concept::new(canonicalize(&e)))
        .map(|c| (c.text.clone(), c))
        .collect();
    ConceptClass {
        k,
        stride: 1,
        concepts: by_text.into_values().collect(),
        generation_seed: 0,
    }
}

/// Groups expressions by operator count into classes 1..=max_k.
fn classes_from(exprs: Vec<ConceptExpr>, max_k: u8) -> Vec<ConceptClass> {
    (1..=max_k)
        .map(|k| class_of(k, exprs.iter().filter(|e| e.count_operators() == usize::from(k)).cloned().collect()))
        .collect()
}

fn signature(e: &ConceptExpr) -> MeaningSignature {
    MeaningSignature::of(e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn render_parse_round_trip(e in expr()) {
        let c = canonicalize(&e);
        prop_assert_eq!(parse_expression(&c.render()).unwrap(), c.clone());
        prop_assert_eq!(canonicalize(&parse_expression(&e.render()).unwrap()), c);
    }

    #[test]
    fn canonicalize_preserves_count_and_meaning(e in expr()) {
        let c = canonicalize(&e);
        prop_assert_eq!(c.count_operators(), e.count_operators());
        prop_assert_eq!(FullExtension::of(&c), FullExtension::of(&e));
        prop_assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn signature_distance_is_a_metric(a in expr(), b in expr(), c in expr()) {
        let (sa, sb, sc) = (signature(&a), signature(&b), signature(&c));
        let ab = signature_distance(&sa, &sb).unwrap();
        prop_assert_eq!(signature_distance(&sa, &sa).unwrap(), 0);
        prop_assert_eq!(ab, signature_distance(&sb, &sa).unwrap());
        prop_assert_eq!(ab == 0, sa == sb);
        prop_assert!(signature_distance(&sa, &sc).unwrap() <= ab + signature_distance(&sb, &sc).unwrap());
    }

    #[test]
    fn grid_evaluator_agrees_with_direct_evaluation(exprs in prop::collection::vec(expr(), 1..6)) {
        let grid = Grid::full();
        let mut evaluator = GridEvaluator::new(grid);
        for e in &exprs {
            let bits = evaluator.extension(e);
            for (i, &(t, x)) in grid.points().iter().enumerate() {
                prop_assert_eq!(bits.get(i), e.evaluate(t, x));
            }
        }
    }

    #[test]
    fn dedup_leaves_no_redundant_retained_pair(
        exprs in prop::collection::vec(expr(), 1..40),
        per_vector in any::<bool>(),
    ) {
        let mode = if per_vector { DedupMode::PerVector } else { DedupMode::Summed };
        let mut classes = classes_from(exprs, 5);
        let rule = EligibilityRule::default();
        dedup_classes(&mut classes, mode, rule).unwrap();
        let retained: Vec<&Concept> = classes.iter().flat_map(ConceptClass::retained).collect();
        for (i, a) in retained.iter().enumerate() {
            prop_assert_eq!(filter_eligibility(&FullExtension::of(&a.expr), rule), Eligibility::Eligible);
            for b in &retained[i + 1..] {
                let d = signature_distance(&signature(&a.expr), &signature(&b.expr)).unwrap();
                prop_assert!(d > 0, "{} and {} share a meaning", a.text, b.text);
                if a.complexity != b.complexity && mode == DedupMode::Summed {
                    prop_assert!(d >= 3, "{} and {} are {} apart", a.text, b.text, d);
                }
            }
        }
        for c in classes.iter().flat_map(|c| &c.concepts) {
            prop_assert!(c.status != ConceptStatus::Raw);
        }
    }

    #[test]
    fn dedup_is_monotone_in_previous_classes(
        prev_exprs in prop::collection::vec(expr(), 0..15),
        extra in expr(),
        this_exprs in prop::collection::vec(expr(), 1..20),
    ) {
        let mut prev = class_of(1, prev_exprs.iter().filter(|e| e.count_operators() <= 2).cloned().collect());
        let mut this = class_of(3, this_exprs.into_iter().filter(|e| e.count_operators() >= 3).collect());
        compute_signatures(&mut prev);
        compute_signatures(&mut this);
        for c in &mut prev.concepts {
            c.status = ConceptStatus::Retained;
        }
        for c in &mut this.concepts {
            c.status = ConceptStatus::Retained;
        }
        let mut bigger = prev.clone();
        let mut added = Concept::new(canonicalize(&extra));
        added.signature = Some(signature(&added.expr));
        added.status = ConceptStatus::Retained;
        bigger.concepts.push(added);

        let mut a = this.clone();
        let mut b = this;
        dedup_across_classes(&mut a, &[&prev], DedupMode::Summed).unwrap();
        dedup_across_classes(&mut b, &[&bigger], DedupMode::Summed).unwrap();
        for (before, after) in a.concepts.iter().zip(&b.concepts) {
            if before.status.is_discarded() {
                prop_assert!(after.status.is_discarded(), "{} came back", before.text);
            }
        }
    }

    #[test]
    fn prompts_round_trip_and_respect_labels(e in expr(), seed in any::<u64>()) {
        let full = FullExtension::of(&e);
        prop_assume!(full.positives() >= 11 && full.negatives() >= 11);
        let id = ConceptId::of_text(&canonicalize(&e).render());
        let set = build_prompt_set(&id, &e, seed, 10).unwrap();
        prop_assert_eq!(&set, &build_prompt_set(&id, &e, seed, 10).unwrap());
        for (i, record) in set.records().iter().enumerate() {
            prop_assert_eq!(record.answer, i % 2 == 0);
            let parsed = parse_prompt_text(&record.text).unwrap();
            prop_assert_eq!(parsed.examples.len(), 20);
            prop_assert_eq!(parsed.examples.iter().filter(|(_, l)| *l).count(), 10);
            for &((t, x), label) in &parsed.examples {
                prop_assert_eq!(e.evaluate(t, x), label);
                prop_assert!((t, x) != parsed.question);
            }
            prop_assert_eq!(parsed.question, (record.question_total, record.question_num));
            prop_assert_eq!(e.evaluate(parsed.question.0, parsed.question.1), record.answer);
        }
    }

    #[test]
    fn parse_answer_is_total(text in ".{0,40}") {
        let p = parse_answer(&text);
        prop_assert_eq!(p.raw_text.as_deref(), Some(text.as_str()));
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .map(str::to_ascii_lowercase)
            .collect();
        let decisive = words.iter().any(|w| w == "yes" || w == "no");
        prop_assert_eq!(p.answer == Answer::Abstain, !decisive);
    }

    #[test]
    fn pearson_is_symmetric_and_affine_invariant(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..12),
        scale in 0.1f64..50.0,
        shift in -100.0f64..100.0,
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let Ok(r) = pearson(&xs, &ys) else { return Ok(()) };
        prop_assert!((r.r - pearson(&ys, &xs).unwrap().r).abs() < 1e-9);
        let moved: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
        prop_assert!((r.r - pearson(&xs, &moved).unwrap().r).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn accuracy_is_permutation_invariant(
        outcomes in prop::collection::vec((0u8..4, any::<bool>(), 0u8..3), 1..60),
        perm_seed in any::<u64>(),
    ) {
        let ids: Vec<ConceptId> = (0..4).map(|i| ConceptId::of_text(&format!("x == {i}"))).collect();
        let records: Vec<EvalRecord> = outcomes
            .iter()
            .enumerate()
            .map(|(i, &(c, answer, kind))| {
                let prediction = match kind {
                    0 => Prediction::label(answer),
                    1 => Prediction::label(!answer),
                    _ => Prediction::abstain(),
                };
                EvalRecord::scored(ids[usize::from(c)].clone(), i, answer, prediction)
            })
            .collect();
        let mut shuffled = records.clone();
        let mut state = perm_seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let class_of: BTreeMap<ConceptId, u8> = ids.iter().cloned().zip([1, 2, 2, 3]).collect();
        for policy in [AbstainPolicy::Incorrect, AbstainPolicy::Excluded] {
            prop_assert_eq!(concept_accuracy(&records, policy), concept_accuracy(&shuffled, policy));
            prop_assert_eq!(summarize("m", &records, &class_of, policy), summarize("m", &shuffled, &class_of, policy));
        }
    }
}

#[test]
fn class_one_is_every_integer_comparison() {
    let oracle: BTreeSet<String> = CompareOp::ALL
        .iter()
        .flat_map(|op| (0..=100).map(move |c| format!("(x {} {c})", op.symbol())))
        .collect();
    let class = enumerate_class(1, &EnumerationOptions::default()).unwrap();
    let texts: BTreeSet<String> = class.concepts.iter().map(|c| c.text.clone()).collect();
    assert_eq!(texts, oracle);
}

#[test]
fn class_two_is_every_scaled_comparison() {
    let class = enumerate_class(2, &EnumerationOptions::default()).unwrap();
    let texts: BTreeSet<String> = class.concepts.iter().map(|c| c.text.clone()).collect();
    let oracle: BTreeSet<String> = ["<", ">"]
        .iter()
        .flat_map(|op| FRACTIONS.iter().map(move |f| format!("(x {op} {f} * n)")))
        .collect();
    assert_eq!(texts, oracle);
}

#[test]
fn class_three_members_are_unique_and_sized() {
    let options = EnumerationOptions::default();
    let class = enumerate_class(3, &options).unwrap();
    let mut seen = BTreeSet::new();
    for c in &class.concepts {
        assert_eq!(c.expr.count_operators(), 3, "{}", c.text);
        assert!(seen.insert(c.text.clone()), "{} repeated", c.text);
        assert_eq!(parse_expression(&c.text).unwrap(), c.expr);
    }
    let again = enumerate_class(3, &options).unwrap();
    let records = |c: &ConceptClass| c.concepts.iter().map(Concept::record).collect::<Vec<_>>();
    assert_eq!(records(&class), records(&again));
}

//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain values and returns a JSON string. The JSON is
//! built by ordinary functions in this crate so it can be tested natively.

use conceptbench_core::dedup::{filter_eligibility, Eligibility, EligibilityRule};
use conceptbench_core::enumerator::ConceptId;
use conceptbench_core::grammar::{canonicalize, parse_expression};
use conceptbench_core::promptgen::{build_prompt, generate_examples, render_prompt};
use conceptbench_core::semantics::{FullExtension, MeaningSignature, MAX_TOTAL, MIN_TOTAL};
use conceptbench_core::stats::{ols_fit, pearson};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Canonical form, complexity and extension of an expression.
///
/// `extension` is one string per total (5 to 100), where character `x` is
/// `1` when the concept holds for `(total, x)`.
pub fn analyze_json(expr: &str) -> Result<Value, String> {
    let parsed = parse_expression(expr).map_err(|e| e.to_string())?;
    let canonical = canonicalize(&parsed);
    let text = canonical.render();
    let extension = FullExtension::of(&canonical);
    let rows: Vec<String> = (MIN_TOTAL..=MAX_TOTAL)
        .map(|t| (0..=t).map(|x| if extension.get(t, x) { '1' } else { '0' }).collect())
        .collect();
    let eligible = filter_eligibility(&extension, EligibilityRule::default()) == Eligibility::Eligible;
    Ok(json!({
        "canonical": text,
        "id": ConceptId::of_text(&text).as_str(),
        "complexity": canonical.count_operators(),
        "positives": extension.positives(),
        "negatives": extension.negatives(),
        "eligible": eligible,
        "signature": MeaningSignature::of(&canonical).to_hex(),
        "min_total": MIN_TOTAL,
        "extension": rows,
    }))
}

/// One prompt for `expr` whose question has the given answer.
pub fn sample_prompt_json(expr: &str, seed: u64, answer: bool) -> Result<Value, String> {
    let canonical = canonicalize(&parse_expression(expr).map_err(|e| e.to_string())?);
    let id = ConceptId::of_text(&canonical.render());
    let pool = generate_examples(&canonical, seed);
    let prompt = build_prompt(&id, &pool, answer, seed).map_err(|e| e.to_string())?;
    Ok(json!({
        "text": render_prompt(&prompt),
        "answer": if prompt.answer { "Yes" } else { "No" },
        "question": [prompt.question.total, prompt.question.num],
    }))
}

/// Pearson correlation and least-squares line of class means against
/// class index (1, 2, ...).
pub fn trend_json(means: &[f64]) -> Result<Value, String> {
    let xs: Vec<f64> = (1..=means.len()).map(|k| k as f64).collect();
    let corr = pearson(&xs, means).map_err(|e| e.to_string())?;
    let fit = ols_fit(&xs, means).map_err(|e| e.to_string())?;
    Ok(json!({
        "r": corr.r,
        "p": corr.p,
        "n": corr.n,
        "slope": fit.slope,
        "intercept": fit.intercept,
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze(expr: &str) -> Result<String, JsError> {
    to_js(analyze_json(expr))
}

#[wasm_bindgen]
pub fn sample_prompt(expr: &str, seed: u32, answer: bool) -> Result<String, JsError> {
    to_js(sample_prompt_json(expr, u64::from(seed), answer))
}

#[wasm_bindgen]
pub fn trend(means: &[f64]) -> Result<String, JsError> {
    to_js(trend_json(means))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_less_than_half() {
        let v = analyze_json("x < 1/2 * n").unwrap();
        assert_eq!(v["canonical"], "(x < 1/2 * n)");
        assert_eq!(v["complexity"], 2);
        let rows = v["extension"].as_array().unwrap();
        assert_eq!(rows.len(), 96);
        assert_eq!(rows[0], "111000");
        let ones: usize = rows.iter().map(|r| r.as_str().unwrap().matches('1').count()).sum();
        assert_eq!(v["positives"], ones);
        assert_eq!(v["eligible"], true);
    }

    #[test]
    fn analyze_reports_parse_errors() {
        assert!(analyze_json("x < ").is_err());
        assert!(analyze_json("x == 1/2 * n").is_err());
    }

    #[test]
    fn prompt_has_requested_answer() {
        let v = sample_prompt_json("(x > 5) and (x < 40)", 3, false).unwrap();
        assert_eq!(v["answer"], "No");
        let text = v["text"].as_str().unwrap();
        assert!(text.starts_with("Let us define a new word, bnik.\n"));
        assert_eq!(text.lines().count(), 43);
        assert_eq!(sample_prompt_json("(x > 5) and (x < 40)", 3, false).unwrap(), v);
    }

    #[test]
    fn trend_on_a_line() {
        let v = trend_json(&[0.9, 0.8, 0.7]).unwrap();
        assert!((v["r"].as_f64().unwrap() + 1.0).abs() < 1e-12);
        assert!((v["slope"].as_f64().unwrap() + 0.1).abs() < 1e-12);
        assert!((v["intercept"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(trend_json(&[0.5, 0.5, 0.5]).is_err());
    }
}

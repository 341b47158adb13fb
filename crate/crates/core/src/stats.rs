//! Accuracy aggregation and the complexity/accuracy correlation analysis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumerator::ConceptId;
use crate::learners::{Answer, Prediction};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no evaluated records")]
    NoData,
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("input has zero variance")]
    DegenerateInput,
}

/// Outcome of one prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub concept_id: ConceptId,
    pub prompt_index: usize,
    pub answer: bool,
    pub prediction: Prediction,
    /// `None` when the prompt could not be evaluated.
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn scored(concept_id: ConceptId, prompt_index: usize, answer: bool, prediction: Prediction) -> Self {
        let correct = Some(prediction.answer == Answer::from_label(answer));
        Self {
            concept_id,
            prompt_index,
            answer,
            prediction,
            correct,
            attempts: None,
            error: None,
        }
    }

    pub fn failed(concept_id: ConceptId, prompt_index: usize, answer: bool, error: String) -> Self {
        Self {
            concept_id,
            prompt_index,
            answer,
            prediction: Prediction::abstain(),
            correct: None,
            attempts: None,
            error: Some(error),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbstainPolicy {
    /// An abstention counts as a wrong answer.
    #[default]
    Incorrect,
    /// Abstentions are left out of the denominator.
    Excluded,
}

impl std::str::FromStr for AbstainPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incorrect" => Ok(AbstainPolicy::Incorrect),
            "excluded" => Ok(AbstainPolicy::Excluded),
            other => Err(format!("unknown abstain policy `{other}`")),
        }
    }
}

/// Fraction of evaluated records that are correct.
pub fn concept_accuracy(records: &[EvalRecord], policy: AbstainPolicy) -> Result<f64, StatsError> {
    let mut evaluated = 0usize;
    let mut correct = 0usize;
    for r in records {
        let Some(ok) = r.correct else { continue };
        if policy == AbstainPolicy::Excluded && r.prediction.answer == Answer::Abstain {
            continue;
        }
        evaluated += 1;
        correct += usize::from(ok);
    }
    if evaluated == 0 {
        return Err(StatsError::NoData);
    }
    Ok(correct as f64 / evaluated as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_lengths(xs: &[f64], ys: &[f64], needed: usize) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < needed {
        return Err(StatsError::TooFewPoints { needed, got: xs.len() });
    }
    Ok(())
}

/// Sample Pearson correlation with a two-sided p-value from the
/// t-statistic `r * sqrt((n - 2) / (1 - r^2))` on `n - 2` degrees of freedom.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation, StatsError> {
    check_lengths(xs, ys, 3)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let n = xs.len();
    Ok(Correlation {
        r,
        p: correlation_p_value(r, n),
        n,
    })
}

/// Two-sided p-value of a correlation `r` over `n` points.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    student_t_two_sided(t, df)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// `I_x(a, b)`, evaluated by continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast for x below the mean; use the symmetry
    // I_x(a, b) = 1 - I_{1-x}(b, a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares line through `(xs, ys)`.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    check_lengths(xs, ys, 2)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub k: u8,
    /// Per sampled concept, in concept-id order.
    pub concept_accuracies: Vec<(ConceptId, f64)>,
    pub mean_accuracy: f64,
    pub count: usize,
}

/// Everything reported for one learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    pub learner: String,
    pub classes: Vec<ClassStats>,
    pub correlation: Option<Correlation>,
    pub fit: Option<LinearFit>,
    /// Concepts whose records could not be scored at all.
    pub unscored_concepts: Vec<ConceptId>,
}

/// Aggregates records into per-concept accuracies, per-class means (each
/// concept weighted equally), and the class-index/mean correlation.
pub fn summarize(
    learner: &str,
    records: &[EvalRecord],
    class_of: &BTreeMap<ConceptId, u8>,
    policy: AbstainPolicy,
) -> LearnerReport {
    let mut by_concept: BTreeMap<&ConceptId, Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        by_concept.entry(&r.concept_id).or_default().push(r.clone());
    }
    let mut by_class: BTreeMap<u8, Vec<(ConceptId, f64)>> = BTreeMap::new();
    let mut unscored = Vec::new();
    for (id, recs) in by_concept {
        let Some(&k) = class_of.get(id) else {
            unscored.push(id.clone());
            continue;
        };
        match concept_accuracy(&recs, policy) {
            Ok(acc) => by_class.entry(k).or_default().push((id.clone(), acc)),
            Err(_) => unscored.push(id.clone()),
        }
    }
    let classes: Vec<ClassStats> = by_class
        .into_iter()
        .map(|(k, accs)| {
            let values: Vec<f64> = accs.iter().map(|(_, a)| *a).collect();
            ClassStats {
                k,
                mean_accuracy: mean(&values),
                count: values.len(),
                concept_accuracies: accs,
            }
        })
        .collect();
    let xs: Vec<f64> = classes.iter().map(|c| f64::from(c.k)).collect();
    let ys: Vec<f64> = classes.iter().map(|c| c.mean_accuracy).collect();
    LearnerReport {
        learner: learner.to_string(),
        correlation: pearson(&xs, &ys).ok(),
        fit: ols_fit(&xs, &ys).ok(),
        classes,
        unscored_concepts: unscored,
    }
}

/// Contents of the report files, keyed by file name.
pub fn render_report(reports: &[LearnerReport], provenance: &serde_json::Value) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let header = format!("# meta: {}\n", serde_json::to_string(provenance).unwrap_or_default());

    let mut results = csv::Writer::from_writer(Vec::new());
    results
        .write_record(["learner", "class", "concept_id", "accuracy"])
        .expect("in-memory write");
    let mut means = csv::Writer::from_writer(Vec::new());
    means
        .write_record(["learner", "class", "mean_accuracy", "concepts"])
        .expect("in-memory write");
    for report in reports {
        for class in &report.classes {
            for (id, acc) in &class.concept_accuracies {
                results
                    .write_record([report.learner.as_str(), &class.k.to_string(), id.as_str(), &acc.to_string()])
                    .expect("in-memory write");
            }
            means
                .write_record([
                    report.learner.as_str(),
                    &class.k.to_string(),
                    &class.mean_accuracy.to_string(),
                    &class.count.to_string(),
                ])
                .expect("in-memory write");
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv");
    files.insert("results.csv".to_string(), format!("{header}{}", finish(results)));
    files.insert("class_means.csv".to_string(), format!("{header}{}", finish(means)));

    let learners: BTreeMap<&str, serde_json::Value> = reports
        .iter()
        .map(|r| {
            let value = serde_json::json!({
                "r": r.correlation.map(|c| c.r),
                "p": r.correlation.map(|c| c.p),
                "slope": r.fit.map(|f| f.slope),
                "intercept": r.fit.map(|f| f.intercept),
                "classes": r.classes.iter().map(|c| serde_json::json!({
                    "class": c.k,
                    "mean_accuracy": c.mean_accuracy,
                    "concepts": c.count,
                })).collect::<Vec<_>>(),
                "unscored_concepts": r.unscored_concepts,
            });
            (r.learner.as_str(), value)
        })
        .collect();
    let mut summary = serde_json::json!({
        "meta": provenance,
        "learners": learners,
    });
    if reports.is_empty() {
        summary["note"] = serde_json::json!("no data");
    }
    files.insert(
        "summary.json".to_string(),
        serde_json::to_string_pretty(&summary).expect("json") + "\n",
    );
    files.insert("table.txt".to_string(), correlation_table(reports));
    files
}

/// Plain-text table of learner, PCC and p-value.
pub fn correlation_table(reports: &[LearnerReport]) -> String {
    if reports.is_empty() {
        return "no data\n".to_string();
    }
    let width = reports.iter().map(|r| r.learner.len()).max().unwrap_or(0).max("Learner".len());
    let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "Learner", "PCC", "p-value");
    for r in reports {
        let (pcc, p) = match r.correlation {
            Some(c) => (format!("{:.3}", c.r), format!("{:.3}", c.p)),
            None => ("n/a".to_string(), "n/a".to_string()),
        };
        out.push_str(&format!("{:<width$}  {pcc:>8}  {p:>8}\n", r.learner));
    }
    out
}

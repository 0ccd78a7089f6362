//! Fixture-driven parser checks. Each returns one message per failing case.

use rubric_rewards::eval::{extract_boxed, Label};
use rubric_rewards::parse::parse_rating;
use rubric_rewards::synthesis::{parse_and_validate, parse_rubric_json, validate_items};
use serde::Deserialize;

use super::fixture;

#[derive(Deserialize)]
pub struct RatingCase {
    pub raw: String,
    pub expect: Option<i64>,
}

#[derive(Deserialize)]
struct RubricCase {
    raw: String,
    expect: String,
    #[serde(default)]
    warnings: usize,
}

#[derive(Deserialize)]
struct BoxedCase {
    response: String,
    expect: Option<String>,
}

pub fn rating_cases() -> Vec<RatingCase> {
    fixture("ratings.jsonl")
}

pub fn rating_failures() -> (usize, Vec<String>) {
    let cases = rating_cases();
    let failures = cases
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let got = parse_rating(&c.raw).ok();
            (got != c.expect).then(|| format!("rating case {i}: got {got:?}, want {:?}", c.expect))
        })
        .collect();
    (cases.len(), failures)
}

pub fn rubric_failures() -> (usize, Vec<String>) {
    let cases: Vec<RubricCase> = fixture("rubrics.jsonl");
    let mut failures = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let problem = match c.expect.as_str() {
            "ok" => match parse_and_validate(&c.raw) {
                Ok(v) if v.warnings.len() == c.warnings => None,
                Ok(v) => Some(format!(
                    "{} warnings, want {}",
                    v.warnings.len(),
                    c.warnings
                )),
                Err(e) => Some(e.to_string()),
            },
            "schema" => parse_rubric_json(&c.raw)
                .is_ok()
                .then(|| "schema accepted".to_string()),
            rule => match parse_rubric_json(&c.raw) {
                Err(e) => Some(format!("schema rejected: {e}")),
                Ok(items) => match validate_items(&items) {
                    Ok(_) => Some(format!("{rule} not enforced")),
                    Err(report) if !report.errors.iter().any(|v| v.rule == rule) => {
                        Some(format!("{rule} missing from {:?}", report.errors))
                    }
                    Err(_) => parse_and_validate(&c.raw)
                        .is_ok()
                        .then(|| "accepted end to end".to_string()),
                },
            },
        };
        if let Some(p) = problem {
            failures.push(format!("rubric case {i} ({}): {p}", c.expect));
        }
    }
    (cases.len(), failures)
}

pub fn boxed_failures() -> (usize, Vec<String>) {
    let cases: Vec<BoxedCase> = fixture("gpqa_extraction.jsonl");
    let failures = cases
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let expect = c
                .expect
                .as_deref()
                .map(|s| Label::parse(s).expect("fixture label"));
            let got = extract_boxed(&c.response);
            (got != expect).then(|| format!("boxed case {i}: got {got:?}, want {expect:?}"))
        })
        .collect();
    (cases.len(), failures)
}

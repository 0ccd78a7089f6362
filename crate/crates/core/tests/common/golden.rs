//! Fixed bindings for the golden prompt files.

use rubric_rewards::templates::{bindings, render_template, Bindings, TemplateId};

const PROMPT: &str = "What helps a tension headache?";
const RESPONSE: &str = "Drink water and rest.\nAvoid screens for an hour.";
const QUESTION: &str = "Which quantity is conserved only in elastic collisions?";
const REFERENCE_ANSWER: &str = "Kinetic energy; momentum is conserved in both.";

pub fn cases() -> Vec<(String, TemplateId, Bindings)> {
    let mut out = vec![
        (
            "implicit_rubric_likert".to_string(),
            TemplateId::ImplicitRubricLikert,
            bindings([
                ("prompt", PROMPT),
                ("response", RESPONSE),
                (
                    "rubric_list_string",
                    "- [Essential] Essential Criteria: Mentions \"hydration\".\n- [Pitfall] Pitfall Criteria: Recommends \"opioids\".",
                ),
            ]),
        ),
        (
            "simple_likert".to_string(),
            TemplateId::SimpleLikert,
            bindings([("prompt", PROMPT), ("response", RESPONSE)]),
        ),
        (
            "reference_likert".to_string(),
            TemplateId::ReferenceLikert,
            bindings([
                ("prompt", PROMPT),
                ("reference", "Hydration, rest, and ibuprofen if needed."),
                ("response", RESPONSE),
            ]),
        ),
        (
            "gpqa_verifier".to_string(),
            TemplateId::GpqaVerifier,
            bindings([
                ("correct_answer", "B"),
                ("correct_answer_text", "Mitochondrion"),
                ("response_text", "The powerhouse is the mitochondrion, so \\boxed{B}."),
            ]),
        ),
        (
            "perturbation".to_string(),
            TemplateId::Perturbation,
            bindings([
                ("prompt", PROMPT),
                ("ideal_completion", "Drink water, rest in a dark room, and take ibuprofen if needed."),
            ]),
        ),
    ];
    for domain in ["medicine", "science"] {
        out.push((
            format!("synthesis_{domain}"),
            TemplateId::RubricSynthesis,
            bindings([
                ("domain", domain),
                ("question", QUESTION),
                ("reference_answer", REFERENCE_ANSWER),
            ]),
        ));
        out.push((
            format!("synthesis_{domain}_no_reference"),
            TemplateId::RubricSynthesis,
            bindings([("domain", domain), ("question", QUESTION)]),
        ));
    }
    out
}

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}.txt", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Renders the named case and compares it with its golden file.
pub fn check(name: &str) -> Result<(), String> {
    let (_, id, b) = cases()
        .into_iter()
        .find(|(n, _, _)| n == name)
        .unwrap_or_else(|| panic!("no golden case {name}"));
    let rendered = render_template(id, &b).map_err(|e| e.to_string())?.text();
    let expected = golden(name);
    if rendered == expected {
        return Ok(());
    }
    let line = rendered
        .lines()
        .zip(expected.lines())
        .position(|(a, b)| a != b)
        .map(|i| i + 1);
    Err(format!(
        "{name}: first differing line {line:?}\n--- rendered ---\n{rendered}\n--- golden ---\n{expected}"
    ))
}

//! Judge and generator prompt templates.
//!
//! Each template is a system/user pair with `{name}` placeholders. Rendering
//! is a single left-to-right pass, so substituted text is never re-scanned
//! and literal braces in the template body (the JSON examples) are left
//! alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::{Criterion, Rubric};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template:?} is missing binding for placeholder {{{placeholder}}}")]
    MissingBinding {
        template: TemplateId,
        placeholder: String,
    },
    #[error("template {template:?}: placeholder {{{placeholder}}} must not be empty")]
    EmptyBinding {
        template: TemplateId,
        placeholder: String,
    },
}

/// Every prompt the toolkit sends to a judge or generator model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    ImplicitRubricLikert,
    SimpleLikert,
    ReferenceLikert,
    CriterionBinary,
    GpqaVerifier,
    RubricSynthesis,
    Perturbation,
}

/// Which rubric-synthesis instructions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(alias = "medicine", alias = "medical")]
    Medicine,
    #[serde(alias = "science")]
    Science,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Medicine => "Medicine",
            Domain::Science => "Science",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        match s.to_ascii_lowercase().as_str() {
            "medicine" | "medical" => Some(Domain::Medicine),
            "science" => Some(Domain::Science),
            _ => None,
        }
    }
}

/// How `{rubric_list_string}` is rendered for the implicit judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricRendering {
    /// `- [Essential] <description>`
    #[default]
    Categories,
    /// `- [weight=0.7] <description>`
    NumericWeights,
}

/// A rendered prompt ready to send. `system` may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    /// Concatenated form used for golden files and single-message backends.
    pub fn text(&self) -> String {
        if self.system.is_empty() {
            self.user.clone()
        } else {
            format!("{}\n\n{}", self.system, self.user)
        }
    }
}

pub type Bindings = BTreeMap<String, String>;

/// Convenience constructor for binding maps.
pub fn bindings<K: Into<String>, V: Into<String>>(
    pairs: impl IntoIterator<Item = (K, V)>,
) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}

const IMPLICIT_SYSTEM: &str = r#"You are an expert evaluator. Given a user prompt, a generated response, and a list of quality rubrics, please rate the overall quality of the response on a scale of 1 to 10 based on how well it satisfies the rubrics.

Consider all rubrics holistically when determining your score. A response that violates multiple rubrics should receive a lower score, while a response that satisfies all rubrics should receive a higher score.

Start your response with a valid JSON object that starts with "```json" and ends with "```".
The JSON object should contain a single key "rating" and the value should be an integer between 1 and 10.

Example response:
```json
{
  "rating": 7
}```"#;

const IMPLICIT_USER: &str = r#"Given the following prompt, response, and rubrics, please rate the overall quality of the response on a scale of 1 to 10 based on how well it satisfies the rubrics.

<prompt>
{prompt}
</prompt>

<response>
{response}
</response>

<rubrics>
{rubric_list_string}
</rubrics>

Your JSON Evaluation:"#;

const SIMPLE_SYSTEM: &str = r#"You are an expert evaluator. Given a user prompt and a generated response, please rate the overall quality of the response on a scale of 1 to 10, where 1 is very poor and 10 is excellent.

Start your response with a valid JSON object that starts with "```json" and ends with "```".
The JSON object should contain a single key "rating" and the value should be an integer between 1 and 10.

Example response:
```json
{
  "rating": 8
}```"#;

const SIMPLE_USER: &str = r#"Given the following prompt, and response, please rate the overall quality of the response on a scale of 1 to 10.

<prompt>
{prompt}
</prompt>

<response>
{response}
</response>

Your JSON Evaluation:"#;

const REFERENCE_SYSTEM: &str = r#"You are an expert evaluator. Given a user prompt, a reference response, and a generated response, please rate the overall quality of the generated response on a scale of 1 to 10 based on how well it compares to the reference response.

Consider factors such as accuracy, completeness, coherence, and helpfulness when comparing to the reference. The reference response represents a high-quality answer that you should use as a benchmark.

Start your response with a valid JSON object that starts with "```json" and ends with "```".
The JSON object should contain a single key "rating" and the value should be an integer between 1 and 10.

Example response:
```json
{
  "rating": 8
}```"#;

const REFERENCE_USER: &str = r#"Given the following prompt, reference response, and generated response, please rate the overall quality of the generated response on a scale of 1 to 10 based on how well it compares to the reference.

<prompt>
{prompt}
</prompt>

<reference_response>
{reference}
</reference_response>

<generated_response>
{response}
</generated_response>

Your JSON Evaluation:"#;

const CRITERION_SYSTEM: &str = r#"You are an expert evaluator. Given a user prompt, a generated response, and a single evaluation criterion, determine whether the response satisfies the criterion.

Judge the criterion in isolation. Ignore every other aspect of response quality.

Start your response with a valid JSON object that starts with "```json" and ends with "```".
The JSON object should contain a single key "satisfied" and the value should be a boolean.

Example response:
```json
{
  "satisfied": true
}```"#;

const CRITERION_USER: &str = r#"Given the prompt and response, does the response satisfy this criterion? Answer with JSON {"satisfied": true|false}

<prompt>
{prompt}
</prompt>

<response>
{response}
</response>

<criterion>
{criterion}
</criterion>

Your JSON Evaluation:"#;

const GPQA_VERIFIER_USER: &str = r#"Determine whether the following model response matches the ground truth answer.

## Ground truth answer## Option {correct_answer} or {correct_answer_text}
## Model Response ##: {response_text}

A response is considered correct if it's final answer is the correct option letter (A, B, C, or D), or has the correct answer text.

Please respond with only "Yes" or "No" (without quotes). Do not include a rationale."#;

const PERTURBATION_USER: &str = r#"You are tasked with creating perturbed versions of health-related responses to generate training data for evaluating model robustness. Given an original health prompt and an ideal completion, you must generate a perturbed version that is strictly worse than the ideal response but still plausible.

Input Format:

[prompt]: {prompt}

[ideal_completion]: {ideal_completion}

Task Instructions:
For the perturbed version, follow this exact process:

[reasoning]:
Explain your strategy for making the response worse. Consider these perturbation approaches:

- Medical Accuracy: Introduce subtle medical inaccuracies or outdated information
- Completeness: Remove crucial information or context
- Clarity: Make explanations less clear or more confusing
- Safety: Reduce appropriate medical disclaimers or caveats
- Specificity: Replace specific advice with vague generalizations
- Structure: Disorganize the logical flow of information
- Tone: Make the response less empathetic or more dismissive

[perturbed_completion]:
Create the modified response based on your reasoning strategy.

[chunks_added]:
List any new text segments you added (even if they're incorrect or unhelpful)

[chunks_removed]:
List any text segments you removed from the ideal response

Quality Guidelines:

- Ensure Degradation: Each perturbed response must be objectively worse than the ideal response
- Maintain Plausibility: The perturbed responses should still seem like reasonable attempts (not obviously nonsensical)
- Vary Approaches: Use different perturbation strategies for each version
- Track Changes Precisely: Be specific about what text was added or removed
- Health Context Sensitivity: Be mindful that health misinformation can be harmful - focus on subtle degradations rather than dangerous advice

Example Perturbation Strategies:

- Remove important safety warnings or medical disclaimers
- Add outdated medical information that was once accepted but is now known to be incorrect
- Remove specific dosage information or timing details
- Add overly general statements that replace specific guidance
- Remove context about when to seek professional medical help
- Add confusing or contradictory information
- Remove step-by-step instructions and replace with vague advice
- Add unnecessarily complex medical jargon without explanation"#;

/// Lines removed from the synthesis instructions when no reference answer
/// is supplied.
const MEDICINE_REFERENCE_INPUT: &str =
    "- reference_answer: The ideal answer, including any specific facts, explanations, or advice.\n";
const SCIENCE_REFERENCE_INPUT: &str =
    "- reference_answer: The ideal answer, including any key facts or explanations.\n";
const REFERENCE_GUIDANCE: &str =
    " The reference answer is an ideal response but not necessarily exhaustive; use it only as guidance.";

const MEDICINE_SYNTHESIS: &str = r#"You are an expert rubric writer. Your job is to generate a self-contained set of evaluation criteria (“rubrics”) for judging how good a response is to a given question. Rubrics can cover aspects of a response such as, but not limited to, factual correctness, ideal-response characteristics, style, completeness, helpfulness, harmlessness, patient-centeredness, depth of reasoning, contextual relevance, and empathy. Each item must be self-contained -- non expert readers should not need to infer anything or consult external information. Begin each description with its category: “Essential Criteria: …”, “Important Criteria: …”, “Optional Criteria: …”, or “Pitfall Criteria: Does not mention …”.

Inputs:
- question: The full question text.
- reference_answer: The ideal answer, including any specific facts, explanations, or advice.

Total items:
- Choose 7–20 rubric items based on the complexity of the question.

Each rubric item:
- title (2–4 words).
- description: One sentence starting with its category prefix that explicitly states exactly what to look for. For example:
  - Essential Criteria: Identifies non-contrast helical CT scan as the most sensitive modality for ureteric stones.
  - Pitfall Criteria: Does not mention identifying (B) as the correct answer.
  - Important Criteria: Explains that non-contrast helical CT detects stones of varying sizes and compositions.
  - Optional Criteria: States “The final answer is (B)” or similar answer choice formatting.
- weight: For Essential/Important/Optional, use 1–5 (5 = most important); for Pitfall, use –1 or –2.

Category guidance:
- Essential: Critical facts or safety checks; if missing, the response is invalid (weight 5).
- Important: Key reasoning, completeness, or clarity; strongly affects quality (weight 3–4).
- Optional: Helpful style or extra depth; nice to have but not deal-breaking (weight 1–2).
- Pitfall: Common mistakes or omissions specific to this prompt—identify things a respondent often forgets or misstates. Each Pitfall description must begin with “Pitfall Criteria: Does not mention …” or “Pitfall Criteria: Recommends …” and use weight –1 or –2.

To ensure self-contained guidance:
- When referring to answer choices, explicitly say “Identifies (A)”, “Identifies (B)”, etc., rather than vague phrasing.
- If the format requires a conclusion like “The final answer is (B)”, include a rubric item such as:
  - Essential Criteria: Includes a clear statement “The final answer is (B)”.
- If reasoning should precede the answer, include a rubric like:
  - Important Criteria: Presents the explanation before stating the final answer.
- If brevity is valued, include a rubric like:
  - Optional Criteria: Remains concise and avoids unnecessary detail.
- If the question context demands mention of specific findings, include that explicitly (e.g., “Essential Criteria: Mentions that CT does not require contrast”).

Output:
Provide a JSON array of rubric objects. Each object must contain exactly three keys—title, description, and weight. Do not copy large blocks of the question or reference_answer into the text. Each description must begin with its category prefix, and no extra keys are allowed.

Now, given the question and reference_answer, generate the rubric as described. The reference answer is an ideal response but not necessarily exhaustive; use it only as guidance."#;

const SCIENCE_SYNTHESIS: &str = r#"You are an expert rubric writer for science questions in the domains of Biology, Physics, and Chemistry. Your job is to generate a self-contained set of evaluation criteria (“rubrics”) for judging how good a response is to a given question in one of these domains. Rubrics can cover aspects such as factual correctness, depth of reasoning, clarity, completeness, style, helpfulness, and common pitfalls. Each rubric item must be fully self-contained so that non-expert readers need not consult any external information.

Inputs:
- question: The full question text.
- reference_answer: The ideal answer, including any key facts or explanations.

Total items:
- Choose 7–20 rubric items based on question complexity.

Each rubric item must include exactly three keys:
1. title (2–4 words)
2. description: One sentence beginning with its category prefix, explicitly stating what to look for. For example:
  - Essential Criteria: States that in the described closed system, the total mechanical energy (kinetic plus potential) before the event equals the total mechanical energy after the event.
  - Important Criteria: Breaks down numerical energy values for each stage, demonstrating that initial kinetic energy plus initial potential energy equals final kinetic energy plus final potential energy.
  - Optional Criteria: Provides a concrete example, such as a pendulum converting between kinetic and potential energy, to illustrate how energy shifts within the system.
  - Pitfall Criteria: Does not mention that frictional or air-resistance losses are assumed negligible when applying conservation of mechanical energy.
3. weight: For Essential/Important/Optional, use 1–5 (5 = most important); for Pitfall, use –1 or –2.

Category guidance:
- Essential: Critical facts or safety checks; omission invalidates the response.
- Important: Key reasoning or completeness; strongly affects quality.
- Optional: Nice-to-have style or extra depth.
- Pitfall: Common mistakes or omissions; highlight things often missed.

Format notes:
- When referring to answer choices, explicitly say “Identifies (A)”, “Identifies (B)”, etc.
- If a clear conclusion is required (e.g. “The final answer is (B)”), include an Essential Criteria for it.
- If reasoning should precede the final answer, include an Important Criteria to that effect.
- If brevity is valued, include an Optional Criteria about conciseness.

Output:
Provide a JSON array of rubric objects. Each object must contain exactly three keys—title, description, and weight. Do not copy large blocks of the question or reference_answer into the text. Each description must begin with its category prefix, and no extra keys are allowed.

Now, given the question and reference_answer, generate the rubric as described. The reference answer is an ideal response but not necessarily exhaustive; use it only as guidance."#;

const SYNTHESIS_USER_WITH_REFERENCE: &str =
    "question:\n{question}\n\nreference_answer:\n{reference_answer}";
const SYNTHESIS_USER_NO_REFERENCE: &str = "question:\n{question}";

impl TemplateId {
    /// Placeholders that must be bound. Synthesis additionally needs
    /// `domain`, and takes `reference_answer` optionally.
    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::ImplicitRubricLikert => &["prompt", "response", "rubric_list_string"],
            TemplateId::SimpleLikert => &["prompt", "response"],
            TemplateId::ReferenceLikert => &["prompt", "reference", "response"],
            TemplateId::CriterionBinary => &["prompt", "response", "criterion"],
            TemplateId::GpqaVerifier => &["correct_answer", "correct_answer_text", "response_text"],
            TemplateId::RubricSynthesis => &["domain", "question"],
            TemplateId::Perturbation => &["prompt", "ideal_completion"],
        }
    }

    /// Whether the judge answers with a Likert rating.
    pub fn is_likert(self) -> bool {
        matches!(
            self,
            TemplateId::ImplicitRubricLikert
                | TemplateId::SimpleLikert
                | TemplateId::ReferenceLikert
        )
    }
}

/// Fills `template` from `bindings`. Only `{ident}` tokens whose ident is in
/// `known` are substituted; other braces are copied through.
fn substitute(
    id: TemplateId,
    template: &str,
    known: &[&str],
    bindings: &Bindings,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let token = after
            .find('}')
            .map(|close| &after[..close])
            .filter(|name| known.contains(name));
        match token {
            Some(name) => {
                let value = bindings
                    .get(name)
                    .ok_or_else(|| TemplateError::MissingBinding {
                        template: id,
                        placeholder: name.to_string(),
                    })?;
                out.push_str(value);
                rest = &after[name.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn require(id: TemplateId, bindings: &Bindings) -> Result<(), TemplateError> {
    for p in id.required_placeholders() {
        if !bindings.contains_key(*p) {
            return Err(TemplateError::MissingBinding {
                template: id,
                placeholder: p.to_string(),
            });
        }
    }
    Ok(())
}

/// Renders a template into system and user messages.
pub fn render_template(
    id: TemplateId,
    bindings: &Bindings,
) -> Result<RenderedPrompt, TemplateError> {
    require(id, bindings)?;
    let placeholders = id.required_placeholders();
    let (system, user) = match id {
        TemplateId::ImplicitRubricLikert => {
            if bindings["rubric_list_string"].trim().is_empty() {
                return Err(TemplateError::EmptyBinding {
                    template: id,
                    placeholder: "rubric_list_string".into(),
                });
            }
            (
                IMPLICIT_SYSTEM.to_string(),
                substitute(id, IMPLICIT_USER, placeholders, bindings)?,
            )
        }
        TemplateId::SimpleLikert => (
            SIMPLE_SYSTEM.to_string(),
            substitute(id, SIMPLE_USER, placeholders, bindings)?,
        ),
        TemplateId::ReferenceLikert => (
            REFERENCE_SYSTEM.to_string(),
            substitute(id, REFERENCE_USER, placeholders, bindings)?,
        ),
        TemplateId::CriterionBinary => (
            CRITERION_SYSTEM.to_string(),
            substitute(id, CRITERION_USER, placeholders, bindings)?,
        ),
        TemplateId::GpqaVerifier => (
            String::new(),
            substitute(id, GPQA_VERIFIER_USER, placeholders, bindings)?,
        ),
        TemplateId::Perturbation => (
            String::new(),
            substitute(id, PERTURBATION_USER, placeholders, bindings)?,
        ),
        TemplateId::RubricSynthesis => {
            let domain = Domain::parse(&bindings["domain"]).ok_or_else(|| {
                TemplateError::MissingBinding {
                    template: id,
                    placeholder: "domain".into(),
                }
            })?;
            let reference = bindings
                .get("reference_answer")
                .filter(|r| !r.trim().is_empty());
            (
                synthesis_instructions(domain, reference.is_some()),
                match reference {
                    Some(_) => substitute(
                        id,
                        SYNTHESIS_USER_WITH_REFERENCE,
                        &["question", "reference_answer"],
                        bindings,
                    )?,
                    None => substitute(id, SYNTHESIS_USER_NO_REFERENCE, &["question"], bindings)?,
                },
            )
        }
    };
    Ok(RenderedPrompt { system, user })
}

/// Rubric-writer instructions for a domain, optionally without the
/// reference-answer input line and closing guidance sentence.
pub fn synthesis_instructions(domain: Domain, with_reference: bool) -> String {
    let (base, input_line) = match domain {
        Domain::Medicine => (MEDICINE_SYNTHESIS, MEDICINE_REFERENCE_INPUT),
        Domain::Science => (SCIENCE_SYNTHESIS, SCIENCE_REFERENCE_INPUT),
    };
    if with_reference {
        base.to_string()
    } else {
        base.replacen(input_line, "", 1)
            .replacen(REFERENCE_GUIDANCE, "", 1)
    }
}

/// One rubric line as shown to a judge.
pub fn render_criterion(criterion: &Criterion, mode: RubricRendering) -> String {
    match mode {
        RubricRendering::Categories => {
            format!("[{}] {}", criterion.category, criterion.description)
        }
        RubricRendering::NumericWeights => {
            format!(
                "[weight={}] {}",
                criterion.aggregation_weight, criterion.description
            )
        }
    }
}

/// The `{rubric_list_string}` block: one `- ` line per criterion.
pub fn render_rubric_list(rubric: &Rubric, mode: RubricRendering) -> String {
    rubric
        .items
        .iter()
        .map(|c| format!("- {}", render_criterion(c, mode)))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rubric::Category;

    #[test]
    fn simple_likert_layout() {
        let p = render_template(
            TemplateId::SimpleLikert,
            &bindings([("prompt", "P"), ("response", "R")]),
        )
        .unwrap();
        assert!(p.user.contains("<prompt>\nP\n</prompt>"));
        assert!(p.user.contains("<response>\nR\n</response>"));
        assert!(p.user.ends_with("Your JSON Evaluation:"));
        assert!(p.system.contains("\"rating\": 8"));
    }

    #[test]
    fn reference_block_present() {
        let b = bindings([("prompt", "P"), ("response", "R"), ("reference", "REF")]);
        let p = render_template(TemplateId::ReferenceLikert, &b).unwrap();
        assert!(p
            .user
            .contains("<reference_response>\nREF\n</reference_response>"));
        assert!(p
            .user
            .contains("<generated_response>\nR\n</generated_response>"));
    }

    #[test]
    fn missing_binding_names_placeholder() {
        let err = render_template(
            TemplateId::ReferenceLikert,
            &bindings([("prompt", "P"), ("response", "R")]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            TemplateError::MissingBinding {
                template: TemplateId::ReferenceLikert,
                placeholder: "reference".into()
            }
        );
        assert!(err.to_string().contains("{reference}"));
    }

    #[test]
    fn empty_rubric_list_rejected() {
        let b = bindings([
            ("prompt", "P"),
            ("response", "R"),
            ("rubric_list_string", "  "),
        ]);
        assert!(matches!(
            render_template(TemplateId::ImplicitRubricLikert, &b),
            Err(TemplateError::EmptyBinding { .. })
        ));
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let b = bindings([("prompt", "{response}"), ("response", "x")]);
        let p = render_template(TemplateId::SimpleLikert, &b).unwrap();
        assert!(p.user.contains("<prompt>\n{response}\n</prompt>"));
    }

    #[test]
    fn rubric_list_rendering() {
        let r = Rubric::new(
            "q",
            vec![
                Criterion::new("A b", "Essential Criteria: Says a.", Category::Essential).unwrap(),
                Criterion::new(
                    "C d",
                    "Pitfall Criteria: Does not mention c.",
                    Category::Pitfall,
                )
                .unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(
            render_rubric_list(&r, RubricRendering::Categories),
            "- [Essential] Essential Criteria: Says a.\n- [Pitfall] Pitfall Criteria: Does not mention c."
        );
        assert_eq!(
            render_rubric_list(&r, RubricRendering::NumericWeights),
            "- [weight=1] Essential Criteria: Says a.\n- [weight=0.8] Pitfall Criteria: Does not mention c."
        );
    }

    #[test]
    fn no_reference_variant_drops_reference_stanza() {
        for d in [Domain::Medicine, Domain::Science] {
            let with = synthesis_instructions(d, true);
            let without = synthesis_instructions(d, false);
            assert!(with.contains("- reference_answer:"));
            assert!(!without.contains("- reference_answer:"));
            assert!(with.ends_with("use it only as guidance."));
            assert!(without.ends_with("generate the rubric as described."));
        }
    }
}

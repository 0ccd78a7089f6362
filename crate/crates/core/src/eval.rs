//! Evaluation machinery: multiple-choice grading with boxed-answer
//! extraction and a verifier fallback, perturbed preference pairs, and
//! pairwise judge-alignment accuracy.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fanout::map_bounded;
use crate::gateway::{FailurePolicy, Gateway, JudgeError, JudgeRequest};
use crate::parse::ParseError;
use crate::reward::{score, MethodConfig, ScoreError, ScoringItem};
use crate::rubric::{Category, Criterion, RewardMethod, Rubric};
use crate::templates::{bindings, TemplateId};

/// Answer label of a four-way multiple-choice question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::B, Label::C, Label::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "A" | "a" => Some(Label::A),
            "B" | "b" => Some(Label::B),
            "C" | "c" => Some(Label::C),
            "D" | "d" => Some(Label::D),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        ["A", "B", "C", "D"][self.index()]
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("instance {id}: expected 4 choices, found {found}")]
    ChoiceCount { id: String, found: usize },
    #[error("instance {id}: duplicate choice text {text:?}")]
    DuplicateChoice { id: String, text: String },
    #[error("{what}: expected {expected}, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no response for instance {id} in run {run}")]
    MissingResponse { id: String, run: usize },
    #[error("ideal completion is empty")]
    EmptyIdeal,
    #[error("malformed perturbation output: {reason}")]
    Malformed { reason: String, raw: String },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// A four-option question. Choice `i` carries label `Label::from_index(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMcq")]
pub struct McqInstance {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub correct_label: Label,
}

#[derive(Deserialize)]
struct RawMcq {
    id: String,
    question: String,
    choices: Vec<String>,
    correct_label: Label,
}

impl TryFrom<RawMcq> for McqInstance {
    type Error = EvalError;

    fn try_from(r: RawMcq) -> Result<Self, EvalError> {
        McqInstance::new(r.id, r.question, r.choices, r.correct_label)
    }
}

impl McqInstance {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        choices: Vec<String>,
        correct_label: Label,
    ) -> Result<Self, EvalError> {
        let id = id.into();
        if choices.len() != 4 {
            return Err(EvalError::ChoiceCount {
                id,
                found: choices.len(),
            });
        }
        for (i, c) in choices.iter().enumerate() {
            if choices[..i].contains(c) {
                return Err(EvalError::DuplicateChoice {
                    id,
                    text: c.clone(),
                });
            }
        }
        Ok(McqInstance {
            id,
            question: question.into(),
            choices,
            correct_label,
        })
    }

    pub fn correct_text(&self) -> &str {
        &self.choices[self.correct_label.index()]
    }

    /// Question followed by labeled options, one per line.
    pub fn render(&self) -> String {
        let mut s = self.question.clone();
        for (l, c) in Label::ALL.iter().zip(&self.choices) {
            s.push_str(&format!("\n({l}) {c}"));
        }
        s
    }
}

/// Where each original label moved: `forward[old] = new`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub forward: [Label; 4],
}

impl LabelMap {
    pub fn identity() -> Self {
        LabelMap {
            forward: Label::ALL,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.forward == Label::ALL
    }

    pub fn apply(&self, old: Label) -> Label {
        self.forward[old.index()]
    }

    pub fn inverse(&self) -> LabelMap {
        let mut back = Label::ALL;
        for old in Label::ALL {
            back[self.apply(old).index()] = old;
        }
        LabelMap { forward: back }
    }

    /// Reorders choices so that the text at `old` lands at `apply(old)`.
    pub fn permute(&self, instance: &McqInstance) -> McqInstance {
        let mut choices = instance.choices.clone();
        for old in Label::ALL {
            choices[self.apply(old).index()] = instance.choices[old.index()].clone();
        }
        McqInstance {
            choices,
            correct_label: self.apply(instance.correct_label),
            ..instance.clone()
        }
    }
}

/// Seed that leaves choices in their original order.
pub const IDENTITY_SEED: u64 = 0;

/// Seeded label shuffle; [`IDENTITY_SEED`] gives the identity.
pub fn label_map_for_seed(seed: u64) -> LabelMap {
    if seed == IDENTITY_SEED {
        return LabelMap::identity();
    }
    let mut forward = Label::ALL;
    forward.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    LabelMap { forward }
}

pub fn permute_choices(instance: &McqInstance, seed: u64) -> (McqInstance, LabelMap) {
    let map = label_map_for_seed(seed);
    (map.permute(instance), map)
}

/// Content of the last `\boxed{...}`, with nested braces balanced.
pub fn last_boxed_content(text: &str) -> Option<&str> {
    const OPEN: &str = "\\boxed{";
    let start = text.rfind(OPEN)? + OPEN.len();
    let mut depth = 1usize;
    for (i, ch) in text[start..].char_indices() {
        match ch {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Label inside the last `\boxed{}`, tolerating case, whitespace, and
/// surrounding punctuation such as `(b)` or `C.`.
pub fn extract_boxed(response: &str) -> Option<Label> {
    let inner = last_boxed_content(response)?;
    let inner = inner.trim();
    let inner = inner
        .strip_prefix("\\text{")
        .and_then(|t| t.strip_suffix('}'))
        .unwrap_or(inner);
    let inner = inner.trim_matches(|c: char| !c.is_alphanumeric());
    Label::parse(inner)
}

/// Asks the verifier whether an unparseable response still lands on the
/// right answer. An exhausted retry budget counts as "no".
pub fn verify_fallback(
    gateway: &Gateway,
    response: &str,
    correct_label: Label,
    correct_text: &str,
) -> Result<bool, JudgeError> {
    let req = JudgeRequest::new(
        TemplateId::GpqaVerifier,
        bindings([
            ("correct_answer", correct_label.as_str()),
            ("correct_answer_text", correct_text),
            ("response_text", response),
        ]),
    );
    match gateway.judge(&req) {
        Ok(r) => Ok(r.binary.unwrap_or(false)),
        Err(JudgeError::Exhausted { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// How one response was graded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grade {
    pub extracted: Option<Label>,
    pub correct: bool,
    pub verified: bool,
}

pub fn grade_response(
    instance: &McqInstance,
    response: &str,
    verifier: Option<&Gateway>,
) -> Result<Grade, JudgeError> {
    let extracted = extract_boxed(response);
    let (correct, verified) = match (extracted, verifier) {
        (Some(l), _) => (l == instance.correct_label, false),
        (None, Some(g)) => (
            verify_fallback(g, response, instance.correct_label, instance.correct_text())?,
            true,
        ),
        (None, None) => (false, false),
    };
    Ok(Grade {
        extracted,
        correct,
        verified,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        if values.is_empty() {
            return MeanStd {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// One evaluation run: responses (in instance order) to the instances as
/// permuted by `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqRun {
    pub seed: u64,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqReport {
    pub n_instances: usize,
    pub per_run: Vec<f64>,
    pub verified: usize,
    pub mean: f64,
    pub std: f64,
}

/// Per-run accuracy over permuted instances, then mean and population
/// standard deviation across runs.
pub fn mcq_accuracy(
    instances: &[McqInstance],
    runs: &[McqRun],
    verifier: Option<&Gateway>,
    max_in_flight: usize,
) -> Result<McqReport, EvalError> {
    let mut per_run = Vec::with_capacity(runs.len());
    let mut verified = 0;
    for run in runs {
        if run.responses.len() != instances.len() {
            return Err(EvalError::CountMismatch {
                what: "responses per run",
                expected: instances.len(),
                found: run.responses.len(),
            });
        }
        let map = label_map_for_seed(run.seed);
        let grades = map_bounded(instances, max_in_flight, |i, inst| {
            grade_response(&map.permute(inst), &run.responses[i], verifier)
        });
        let mut correct = 0;
        for g in grades {
            let g = g?;
            correct += g.correct as usize;
            verified += g.verified as usize;
        }
        per_run.push(if instances.is_empty() {
            0.0
        } else {
            correct as f64 / instances.len() as f64
        });
    }
    let ms = MeanStd::of(&per_run);
    Ok(McqReport {
        n_instances: instances.len(),
        per_run,
        verified,
        mean: ms.mean,
        std: ms.std,
    })
}

/// Audit trail of how the rejected side was derived.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationMeta {
    pub reasoning: String,
    pub chunks_added: Vec<String>,
    pub chunks_removed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    #[serde(default, alias = "perturbation_meta")]
    pub meta: PerturbationMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<Rubric>,
}

impl PreferencePair {
    pub fn swapped(&self) -> PreferencePair {
        PreferencePair {
            chosen: self.rejected.clone(),
            rejected: self.chosen.clone(),
            ..self.clone()
        }
    }
}

const SECTIONS: [&str; 4] = [
    "reasoning",
    "perturbed_completion",
    "chunks_added",
    "chunks_removed",
];

/// Parsed perturbation reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbation {
    pub perturbed: String,
    pub meta: PerturbationMeta,
}

fn section_header(line: &str) -> Option<(usize, &str)> {
    let t = line.trim_start();
    let rest = t.strip_prefix('[')?;
    let close = rest.find(']')?;
    let name = rest[..close].to_ascii_lowercase();
    let idx = SECTIONS.iter().position(|s| *s == name)?;
    let after = rest[close + 1..].trim_start();
    Some((idx, after.strip_prefix(':').unwrap_or(after).trim_start()))
}

fn chunk_list(body: &str) -> Vec<String> {
    body.lines()
        .map(|l| {
            let l = l.trim();
            l.strip_prefix("- ")
                .or_else(|| l.strip_prefix("* "))
                .unwrap_or(l)
                .trim()
                .to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

/// Splits a perturbation reply into its four bracketed sections. Headers
/// match case-insensitively at line starts; the first occurrence of each
/// wins.
pub fn parse_perturbation(raw: &str) -> Result<Perturbation, ParseError> {
    let mut bodies: [Option<String>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in raw.lines() {
        if let Some((idx, rest)) = section_header(line) {
            if bodies[idx].is_none() {
                bodies[idx] = Some(rest.to_string());
                current = Some(idx);
                continue;
            }
        }
        if let Some(body) = current.and_then(|i| bodies[i].as_mut()) {
            body.push('\n');
            body.push_str(line);
        }
    }
    let [reasoning, perturbed, added, removed] = bodies;
    let missing = SECTIONS
        .iter()
        .zip([&reasoning, &perturbed, &added, &removed])
        .find(|(_, b)| b.is_none())
        .map(|(name, _)| *name);
    if let Some(name) = missing {
        return Err(ParseError::new(format!("missing section [{name}]"), raw));
    }
    let perturbed = perturbed.unwrap_or_default().trim().to_string();
    if perturbed.is_empty() {
        return Err(ParseError::new("empty section [perturbed_completion]", raw));
    }
    Ok(Perturbation {
        perturbed,
        meta: PerturbationMeta {
            reasoning: reasoning.unwrap_or_default().trim().to_string(),
            chunks_added: chunk_list(&added.unwrap_or_default()),
            chunks_removed: chunk_list(&removed.unwrap_or_default()),
            raw: Some(raw.to_string()),
        },
    })
}

/// Asks the judge for a degraded version of `ideal` and packages the pair.
pub fn generate_pair(
    gateway: &Gateway,
    prompt: &str,
    ideal: &str,
) -> Result<PreferencePair, EvalError> {
    if ideal.trim().is_empty() {
        return Err(EvalError::EmptyIdeal);
    }
    let req = JudgeRequest::new(
        TemplateId::Perturbation,
        bindings([("prompt", prompt), ("ideal_completion", ideal)]),
    );
    let parse = |raw: &str| {
        let p = parse_perturbation(raw)?;
        if p.perturbed.trim() == ideal.trim() {
            return Err(ParseError::new(
                "perturbed completion equals the ideal completion",
                raw,
            ));
        }
        Ok(p)
    };
    match gateway.judge_with(&req, None, parse) {
        Ok((p, _, _)) => Ok(PreferencePair {
            prompt_id: None,
            prompt: prompt.to_string(),
            chosen: ideal.to_string(),
            rejected: p.perturbed,
            meta: p.meta,
            rubric: None,
        }),
        Err(JudgeError::Exhausted {
            reason,
            raw: Some(raw),
            ..
        }) => Err(EvalError::Malformed { reason, raw }),
        Err(e) => Err(e.into()),
    }
}

/// A prompt with its reference-quality completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealItem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    pub prompt: String,
    pub ideal_completion: String,
}

/// Pairs in input order, plus `(index, error)` for each dropped item.
pub type GeneratedPairs = (Vec<PreferencePair>, Vec<(usize, String)>);

/// Generates one pair per item. Failed items are dropped or abort the run
/// according to `policy`.
pub fn generate_pairs(
    gateway: &Gateway,
    items: &[IdealItem],
    max_in_flight: usize,
    policy: FailurePolicy,
) -> Result<GeneratedPairs, EvalError> {
    let results = map_bounded(items, max_in_flight, |_, it| {
        generate_pair(gateway, &it.prompt, &it.ideal_completion).map(|p| PreferencePair {
            prompt_id: it.prompt_id.clone(),
            ..p
        })
    });
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => pairs.push(p),
            Err(e) if policy == FailurePolicy::Abort => return Err(e),
            Err(e) => dropped.push((i, e.to_string())),
        }
    }
    Ok((pairs, dropped))
}

/// How ties between chosen and rejected ratings count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// A tie is a miss.
    #[default]
    Incorrect,
    /// A tie earns half credit.
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub method: RewardMethod,
    pub judge: String,
    pub n_pairs: usize,
    pub n_correct: usize,
    pub n_ties: usize,
    pub n_incorrect: usize,
    pub n_dropped: usize,
    pub tie_policy: TiePolicy,
    pub accuracy: f64,
}

/// Outcome of comparing one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOutcome {
    Correct,
    Tie,
    Incorrect,
}

pub fn compare_scores(chosen: f64, rejected: f64) -> PairOutcome {
    if chosen > rejected {
        PairOutcome::Correct
    } else if chosen == rejected {
        PairOutcome::Tie
    } else {
        PairOutcome::Incorrect
    }
}

/// Rates both sides of every pair independently and counts how often the
/// chosen side scores strictly higher. Judge failures drop the pair.
pub fn alignment_accuracy(
    pairs: &[PreferencePair],
    gateway: &Gateway,
    method: RewardMethod,
    tie_policy: TiePolicy,
    max_in_flight: usize,
) -> Result<AlignmentReport, EvalError> {
    if !matches!(
        method,
        RewardMethod::RaRImplicit | RewardMethod::SimpleLikert
    ) {
        return Err(EvalError::Score(ScoreError::MissingField {
            method,
            field: "likert rating",
            prompt_id: String::new(),
        }));
    }
    let config = MethodConfig::new(method);
    let item = |p: &PreferencePair, response: &str| ScoringItem {
        prompt_id: p.prompt_id.clone().unwrap_or_default(),
        response_id: None,
        prompt: p.prompt.clone(),
        response: response.to_string(),
        reference: None,
        rubric: p.rubric.clone(),
        ground_truth: None,
    };
    let outcomes = map_bounded(
        pairs,
        max_in_flight,
        |_, p| -> Result<PairOutcome, ScoreError> {
            let c = score(&item(p, &p.chosen), &config, gateway)?;
            let r = score(&item(p, &p.rejected), &config, gateway)?;
            Ok(compare_scores(c.score, r.score))
        },
    );
    let (mut n_correct, mut n_ties, mut n_incorrect, mut n_dropped) = (0, 0, 0, 0);
    for o in outcomes {
        match o {
            Ok(PairOutcome::Correct) => n_correct += 1,
            Ok(PairOutcome::Tie) => n_ties += 1,
            Ok(PairOutcome::Incorrect) => n_incorrect += 1,
            Err(e @ ScoreError::MissingField { .. }) => return Err(e.into()),
            Err(_) => n_dropped += 1,
        }
    }
    let credit = n_correct as f64
        + match tie_policy {
            TiePolicy::Incorrect => 0.0,
            TiePolicy::Half => 0.5 * n_ties as f64,
        };
    Ok(AlignmentReport {
        method,
        judge: gateway.backend().name.clone(),
        n_pairs: pairs.len(),
        n_correct,
        n_ties,
        n_incorrect,
        n_dropped,
        tie_policy,
        accuracy: if pairs.is_empty() {
            0.0
        } else {
            credit / pairs.len() as f64
        },
    })
}

const TOPICS: [(&str, [&str; 3]); 8] = [
    (
        "a tension headache",
        ["hydration", "ibuprofen", "sleep hygiene"],
    ),
    (
        "seasonal allergies",
        ["antihistamine", "nasal rinse", "pollen count"],
    ),
    (
        "a sprained ankle",
        ["elevation", "compression", "ice packs"],
    ),
    (
        "mild dehydration",
        ["electrolytes", "small sips", "urine color"],
    ),
    (
        "heartburn after meals",
        ["antacid", "smaller meals", "trigger foods"],
    ),
    (
        "a minor kitchen burn",
        ["cool running water", "sterile dressing", "blistering"],
    ),
    (
        "trouble falling asleep",
        ["fixed bedtime", "screen curfew", "caffeine"],
    ),
    (
        "a persistent dry cough",
        ["humidifier", "honey", "three weeks"],
    ),
];

/// Deterministic preference pairs with keyword rubrics: the chosen side
/// mentions every rubric keyword, the rejected side drops one or more.
pub fn synthetic_pairs(n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (topic, keys) = TOPICS[i % TOPICS.len()];
            let prompt = format!("What should I do about {topic}? (case {i})");
            let mut items: Vec<Criterion> = keys
                .iter()
                .enumerate()
                .map(|(j, k)| {
                    let (cat, title) = match j {
                        0 => (Category::Essential, "Core advice"),
                        1 => (Category::Important, "Supporting step"),
                        _ => (Category::Optional, "Extra context"),
                    };
                    Criterion::new(title, format!("{} Mentions \"{k}\".", cat.prefix()), cat)
                        .expect("valid")
                })
                .collect();
            items.push(
                Criterion::new(
                    "Avoids alarmism",
                    "Pitfall Criteria: Recommends \"emergency surgery\" for a routine complaint.",
                    Category::Pitfall,
                )
                .expect("valid"),
            );
            let rubric = Rubric::new(format!("syn-{i}"), items).expect("non-empty");
            let chosen = format!(
                "For {topic}, start with {}, then add {}. Keep an eye on {} as well.",
                keys[0], keys[1], keys[2]
            );
            let mut dropped: Vec<usize> = (0..3).collect();
            dropped.shuffle(&mut rng);
            let n_drop = 1 + (i % 3);
            let kept: Vec<&str> = (0..3)
                .filter(|j| !dropped[..n_drop].contains(j))
                .map(|j| keys[j])
                .collect();
            let rejected = if kept.is_empty() {
                format!("For {topic}, rest and wait for it to pass.")
            } else {
                format!(
                    "For {topic}, consider {}. Otherwise rest.",
                    kept.join(" and ")
                )
            };
            PreferencePair {
                prompt_id: Some(format!("syn-{i}")),
                prompt,
                chosen,
                rejected,
                meta: PerturbationMeta {
                    reasoning: "Removed rubric-relevant advice.".into(),
                    chunks_added: vec![],
                    chunks_removed: dropped[..n_drop]
                        .iter()
                        .map(|&j| keys[j].to_string())
                        .collect(),
                    raw: None,
                },
                rubric: Some(rubric),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{BackendKind, JudgeBackend, MockKeyword, MockScripted};

    fn scripted(replies: &[&str]) -> Gateway {
        Gateway::new(
            JudgeBackend::mock("s", BackendKind::MockScripted),
            Arc::new(MockScripted::new(
                replies.iter().map(|s| s.to_string()).collect(),
            )),
        )
        .with_backoff(std::time::Duration::ZERO)
    }

    fn inst() -> McqInstance {
        McqInstance::new(
            "q1",
            "Which is a noble gas?",
            vec![
                "Neon".into(),
                "Iron".into(),
                "Oxygen".into(),
                "Sodium".into(),
            ],
            Label::A,
        )
        .unwrap()
    }

    #[test]
    fn boxed_extraction() {
        assert_eq!(extract_boxed("so the answer is \\boxed{A}"), Some(Label::A));
        assert_eq!(extract_boxed("\\boxed{ b }"), Some(Label::B));
        assert_eq!(extract_boxed("the answer is A"), None);
        assert_eq!(
            extract_boxed("\\boxed{A} then \\boxed{(C).}"),
            Some(Label::C)
        );
        assert_eq!(extract_boxed("\\boxed{\\text{D}}"), Some(Label::D));
        assert_eq!(extract_boxed("\\boxed{E}"), None);
        assert_eq!(last_boxed_content("\\boxed{x^{2}}"), Some("x^{2}"));
        assert_eq!(last_boxed_content("\\boxed{open"), None);
    }

    #[test]
    fn permutation_round_trip() {
        let i = inst();
        let (same, map) = permute_choices(&i, IDENTITY_SEED);
        assert_eq!(same, i);
        assert!(map.is_identity());
        for seed in 1..50 {
            let (p, map) = permute_choices(&i, seed);
            assert_eq!(p.correct_text(), "Neon");
            assert_eq!(map.inverse().permute(&p), i);
        }
    }

    #[test]
    fn verifier_fallback() {
        let i = inst();
        assert!(verify_fallback(
            &scripted(&["Yes"]),
            "neon",
            i.correct_label,
            i.correct_text()
        )
        .unwrap());
        assert!(!verify_fallback(
            &scripted(&["No"]),
            "iron",
            i.correct_label,
            i.correct_text()
        )
        .unwrap());
        let g = scripted(&["Yes.", "Yes"]);
        assert!(verify_fallback(&g, "neon", i.correct_label, i.correct_text()).unwrap());
        assert_eq!(g.backend_calls(), 2);
        assert!(!verify_fallback(
            &scripted(&["maybe"]),
            "x",
            i.correct_label,
            i.correct_text()
        )
        .unwrap());
    }

    #[test]
    fn mean_std_population() {
        let m = MeanStd::of(&[1.0, 0.0, 1.0, 0.0]);
        assert_eq!((m.mean, m.std), (0.5, 0.5));
        let m = MeanStd::of(&[0.5; 4]);
        assert_eq!((m.mean, m.std), (0.5, 0.0));
    }

    #[test]
    fn mcq_runs() {
        let insts = vec![inst()];
        let runs: Vec<McqRun> = (1..=4)
            .map(|seed| {
                let l = label_map_for_seed(seed).apply(Label::A);
                McqRun {
                    seed,
                    responses: vec![format!("\\boxed{{{l}}}")],
                }
            })
            .collect();
        let r = mcq_accuracy(&insts, &runs, None, 2).unwrap();
        assert_eq!((r.mean, r.std), (1.0, 0.0));
        let bad = McqRun {
            seed: 0,
            responses: vec![],
        };
        assert!(matches!(
            mcq_accuracy(&insts, &[bad], None, 1),
            Err(EvalError::CountMismatch { .. })
        ));
    }

    const FULL: &str = "[reasoning]: Drop the dose.\n[perturbed_completion]:\nTake some aspirin.\n[chunks_added]:\n- some\n[chunks_removed]:\n- 81 mg\n";

    #[test]
    fn perturbation_sections() {
        let p = parse_perturbation(FULL).unwrap();
        assert_eq!(p.perturbed, "Take some aspirin.");
        assert_eq!(p.meta.reasoning, "Drop the dose.");
        assert_eq!(p.meta.chunks_added, vec!["some"]);
        assert_eq!(p.meta.chunks_removed, vec!["81 mg"]);
        let upper = FULL.replace("[reasoning]", "[REASONING]");
        assert!(parse_perturbation(&upper).is_ok());

        let cut = FULL.split("[chunks_removed]").next().unwrap();
        let err = parse_perturbation(cut).unwrap_err();
        assert!(err.reason.contains("[chunks_removed]"));
    }

    #[test]
    fn pair_generation() {
        let pair = generate_pair(&scripted(&[FULL]), "p", "Take 81 mg aspirin.").unwrap();
        assert_eq!(pair.chosen, "Take 81 mg aspirin.");
        assert_eq!(pair.rejected, "Take some aspirin.");

        let cut = FULL.split("[chunks_removed]").next().unwrap();
        match generate_pair(&scripted(&[cut]), "p", "Take 81 mg aspirin.") {
            Err(EvalError::Malformed { reason, raw }) => {
                assert!(reason.contains("chunks_removed"));
                assert_eq!(raw, cut);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            generate_pair(&scripted(&[FULL]), "p", "Take some aspirin."),
            Err(EvalError::Malformed { .. })
        ));
        assert!(matches!(
            generate_pair(&scripted(&[FULL]), "p", " "),
            Err(EvalError::EmptyIdeal)
        ));
    }

    #[test]
    fn strict_comparison_and_ties() {
        assert_eq!(compare_scores(8.0, 5.0), PairOutcome::Correct);
        assert_eq!(compare_scores(6.0, 6.0), PairOutcome::Tie);
        let pair = PreferencePair {
            prompt_id: None,
            prompt: "p".into(),
            chosen: "a".into(),
            rejected: "b".into(),
            meta: PerturbationMeta::default(),
            rubric: None,
        };
        let g = scripted(&["{\"rating\": 8}", "{\"rating\": 5}"]);
        let r = alignment_accuracy(
            std::slice::from_ref(&pair),
            &g,
            RewardMethod::SimpleLikert,
            TiePolicy::Incorrect,
            1,
        )
        .unwrap();
        assert_eq!((r.n_correct, r.accuracy), (1, 1.0));
        let g = scripted(&["{\"rating\": 6}"]);
        let r = alignment_accuracy(
            std::slice::from_ref(&pair),
            &g,
            RewardMethod::SimpleLikert,
            TiePolicy::Half,
            1,
        )
        .unwrap();
        assert_eq!((r.n_ties, r.accuracy), (1, 0.5));
    }

    #[test]
    fn keyword_mock_separates_methods() {
        let pairs = synthetic_pairs(16, 3);
        let g = Gateway::new(
            JudgeBackend::mock("kw", BackendKind::MockKeyword),
            Arc::new(MockKeyword::new()),
        );
        let rar = alignment_accuracy(
            &pairs,
            &g,
            RewardMethod::RaRImplicit,
            TiePolicy::Incorrect,
            4,
        )
        .unwrap();
        let simple = alignment_accuracy(
            &pairs,
            &g,
            RewardMethod::SimpleLikert,
            TiePolicy::Incorrect,
            4,
        )
        .unwrap();
        assert_eq!(rar.accuracy, 1.0);
        assert_eq!(simple.accuracy, 0.0);
        assert_eq!(simple.n_ties, 16);
    }
}

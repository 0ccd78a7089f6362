//! Reward computation for (prompt, response) pairs under every method.
//!
//! | method            | judge call(s)                      | reward                 |
//! |-------------------|------------------------------------|------------------------|
//! | `SimpleLikert`    | one rating, prompt + response      | normalized rating      |
//! | `ReferenceLikert` | one rating, plus reference answer  | normalized rating      |
//! | `RaRImplicit`     | one rating, plus rendered rubric   | normalized rating      |
//! | `PredefinedRaR`   | one yes/no per generic criterion   | [`explicit_reward`]    |
//! | `RaRExplicit`     | one yes/no per rubric criterion    | [`explicit_reward`]    |
//! | `RLVR`            | none, exact match                  | [`rlvr_reward`]        |

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::last_boxed_content;
use crate::fanout::map_bounded;
use crate::gateway::{FailurePolicy, Gateway, JudgeError};
use crate::rubric::{
    explicit_reward, rlvr_reward, Category, Criterion, CriterionVerdict, LikertNorm, RewardMethod,
    RewardRecord, Rubric, RubricError,
};
use crate::templates::{bindings, render_rubric_list, TemplateId};

/// One thing to score. Which optional fields are needed depends on the
/// method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringItem {
    pub prompt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_id: Option<String>,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<Rubric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl ScoringItem {
    pub fn new(
        prompt_id: impl Into<String>,
        prompt: impl Into<String>,
        response: impl Into<String>,
    ) -> Self {
        ScoringItem {
            prompt_id: prompt_id.into(),
            response_id: None,
            prompt: prompt.into(),
            response: response.into(),
            reference: None,
            rubric: None,
            ground_truth: None,
        }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference = Some(reference.into());
        self
    }

    pub fn with_rubric(mut self, rubric: Rubric) -> Self {
        self.rubric = Some(rubric);
        self
    }

    pub fn with_ground_truth(mut self, answer: impl Into<String>) -> Self {
        self.ground_truth = Some(answer.into());
        self
    }

    pub fn with_response_id(mut self, id: impl Into<String>) -> Self {
        self.response_id = Some(id.into());
        self
    }

    fn response_id(&self) -> String {
        self.response_id
            .clone()
            .unwrap_or_else(|| self.prompt_id.clone())
    }
}

/// Explicit per-criterion judging or one holistic rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    Explicit,
    Implicit,
}

/// Method selection plus the knobs that shape its reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: RewardMethod,
    #[serde(default)]
    pub likert_norm: LikertNorm,
}

impl MethodConfig {
    pub fn new(method: RewardMethod) -> Self {
        MethodConfig {
            method,
            likert_norm: LikertNorm::default(),
        }
    }

    /// Aggregation scheme for the rubric methods.
    pub fn aggregation(&self) -> Option<Aggregation> {
        match self.method {
            RewardMethod::PredefinedRaR | RewardMethod::RaRExplicit => Some(Aggregation::Explicit),
            RewardMethod::RaRImplicit => Some(Aggregation::Implicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{method} needs field `{field}` (prompt_id {prompt_id})")]
    MissingField {
        method: RewardMethod,
        field: &'static str,
        prompt_id: String,
    },
    #[error("prompt_id {prompt_id}: {source}")]
    Judge {
        prompt_id: String,
        #[source]
        source: JudgeError,
    },
    #[error(transparent)]
    Rubric(#[from] RubricError),
}

const PREDEFINED: [(&str, &str); 4] = [
    (
        "Factual accuracy",
        "The response contains correct information without factual errors, inaccuracies, or hallucinations that could mislead the user.",
    ),
    (
        "Complete answer",
        "The response fully answers all essential parts of the question and provides sufficient detail where needed.",
    ),
    (
        "Concise delivery",
        "The response is concise and to the point, avoiding unnecessary verbosity or repetition.",
    ),
    (
        "Practical helpfulness",
        "The response effectively meets the user's practical needs, provides actionable information, and is genuinely helpful for their situation.",
    ),
];

/// The fixed generic rubric: four criteria, uniformly weighted.
pub fn predefined_rubric() -> Rubric {
    static RUBRIC: OnceLock<Rubric> = OnceLock::new();
    RUBRIC
        .get_or_init(|| {
            let items = PREDEFINED
                .iter()
                .map(|(t, d)| {
                    Criterion::unprefixed(*t, *d, Category::Essential, 1.0)
                        .expect("valid criterion")
                })
                .collect();
            Rubric::new("predefined", items).expect("non-empty rubric")
        })
        .clone()
}

/// Exact-match normalization: last `\boxed{...}` content if any, trimmed,
/// lower-cased.
pub fn normalize_answer(text: &str) -> String {
    last_boxed_content(text)
        .unwrap_or(text)
        .trim()
        .to_lowercase()
}

pub fn answers_match(response: &str, ground_truth: &str) -> bool {
    normalize_answer(response) == normalize_answer(ground_truth)
}

fn need<'a, T>(
    value: Option<&'a T>,
    method: RewardMethod,
    field: &'static str,
    item: &ScoringItem,
) -> Result<&'a T, ScoreError> {
    value.ok_or_else(|| ScoreError::MissingField {
        method,
        field,
        prompt_id: item.prompt_id.clone(),
    })
}

/// Per-criterion verdicts for a rubric, in rubric order.
pub fn judge_rubric(
    gateway: &Gateway,
    prompt: &str,
    response: &str,
    rubric: &Rubric,
) -> Result<Vec<CriterionVerdict>, JudgeError> {
    rubric
        .items
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = gateway.judge_criterion(prompt, response, c)?;
            Ok(CriterionVerdict {
                criterion_index: i,
                satisfied: r.binary.unwrap_or(false),
                rationale: Some(r.raw_text),
            })
        })
        .collect()
}

/// Scores one item under `config`.
pub fn score(
    item: &ScoringItem,
    config: &MethodConfig,
    gateway: &Gateway,
) -> Result<RewardRecord, ScoreError> {
    let method = config.method;
    let judge_err = |source| ScoreError::Judge {
        prompt_id: item.prompt_id.clone(),
        source,
    };
    let likert = |template, b| -> Result<(f64, String), ScoreError> {
        let r = gateway.judge_likert(template, b).map_err(judge_err)?;
        let rating = r.rating.expect("likert templates populate rating");
        Ok((config.likert_norm.apply(rating)?, r.raw_text))
    };
    let explicit = |rubric: &Rubric| -> Result<(f64, Vec<CriterionVerdict>), ScoreError> {
        let verdicts =
            judge_rubric(gateway, &item.prompt, &item.response, rubric).map_err(judge_err)?;
        Ok((explicit_reward(rubric, &verdicts)?, verdicts))
    };

    let (score, raw, verdicts) = match method {
        RewardMethod::SimpleLikert => {
            let b = bindings([
                ("prompt", item.prompt.as_str()),
                ("response", item.response.as_str()),
            ]);
            let (s, raw) = likert(TemplateId::SimpleLikert, b)?;
            (s, Some(raw), None)
        }
        RewardMethod::ReferenceLikert => {
            let reference = need(item.reference.as_ref(), method, "reference", item)?;
            let b = bindings([
                ("prompt", item.prompt.as_str()),
                ("reference", reference.as_str()),
                ("response", item.response.as_str()),
            ]);
            let (s, raw) = likert(TemplateId::ReferenceLikert, b)?;
            (s, Some(raw), None)
        }
        RewardMethod::RaRImplicit => {
            let rubric = need(item.rubric.as_ref(), method, "rubric", item)?;
            let b = bindings([
                ("prompt", item.prompt.clone()),
                ("response", item.response.clone()),
                (
                    "rubric_list_string",
                    render_rubric_list(rubric, gateway.rubric_rendering()),
                ),
            ]);
            let (s, raw) = likert(TemplateId::ImplicitRubricLikert, b)?;
            (s, Some(raw), None)
        }
        RewardMethod::PredefinedRaR => {
            let (s, v) = explicit(&predefined_rubric())?;
            (s, None, Some(v))
        }
        RewardMethod::RaRExplicit => {
            let rubric = need(item.rubric.as_ref(), method, "rubric", item)?;
            let (s, v) = explicit(rubric)?;
            (s, None, Some(v))
        }
        RewardMethod::Rlvr => {
            let truth = need(item.ground_truth.as_ref(), method, "ground_truth", item)?;
            (
                rlvr_reward(answers_match(&item.response, truth)),
                None,
                None,
            )
        }
    };
    Ok(RewardRecord {
        prompt_id: item.prompt_id.clone(),
        response_id: item.response_id(),
        method,
        score,
        raw_judge_output: raw,
        verdicts,
    })
}

/// Totals for a dataset run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: RewardMethod,
    pub count: usize,
    pub mean_score: Option<f64>,
    pub failures: usize,
    pub backend_calls: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<FailedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedItem {
    pub index: usize,
    pub prompt_id: String,
    pub error: String,
}

/// Scores every item with bounded concurrency. Output order follows input
/// order. Under [`FailurePolicy::Drop`] failed items are omitted and listed
/// in the summary; under [`FailurePolicy::Abort`] the first failure (in
/// input order) is returned.
pub fn score_dataset(
    items: &[ScoringItem],
    config: &MethodConfig,
    gateway: &Gateway,
    max_in_flight: usize,
    policy: FailurePolicy,
) -> Result<(Vec<RewardRecord>, RunSummary), ScoreError> {
    let calls_before = gateway.backend_calls();
    let results = map_bounded(items, max_in_flight, |_, item| score(item, config, gateway));
    let mut records = Vec::with_capacity(items.len());
    let mut failed = Vec::new();
    for (index, (item, result)) in items.iter().zip(results).enumerate() {
        match result {
            Ok(r) => records.push(r),
            Err(e) if policy == FailurePolicy::Abort => return Err(e),
            Err(e) => failed.push(FailedItem {
                index,
                prompt_id: item.prompt_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let mean_score = (!records.is_empty())
        .then(|| records.iter().map(|r| r.score).sum::<f64>() / records.len() as f64);
    let summary = RunSummary {
        method: config.method,
        count: records.len(),
        mean_score,
        failures: failed.len(),
        backend_calls: gateway.backend_calls() - calls_before,
        failed,
    };
    Ok((records, summary))
}

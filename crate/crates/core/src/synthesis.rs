//! Prompt-specific rubric generation.
//!
//! A generator model receives the domain's rubric-writer instructions plus
//! the question (and reference answer when available) and must reply with
//! a JSON array of `{title, description, weight}` objects. Replies are
//! parsed strictly and validated; malformed ones are re-requested.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fanout::map_bounded;
use crate::gateway::{Gateway, JudgeError, JudgeRequest};
use crate::parse::{first_json_value, ParseError};
use crate::rubric::{category_weight, Category, Criterion, Rubric, RubricError};
use crate::templates::{bindings, Domain, TemplateId};

pub const ITEM_COUNT: RangeInclusive<usize> = 7..=20;
pub const TITLE_WORDS: RangeInclusive<usize> = 2..=4;
pub const DEFAULT_ATTEMPTS: u32 = 3;

/// One input row: `{id, question, reference_answer?, domain}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisTask {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_answer: Option<String>,
    pub domain: Domain,
}

impl SynthesisTask {
    pub fn request(&self) -> JudgeRequest {
        let mut b = bindings([
            ("domain", self.domain.as_str()),
            ("question", self.question.as_str()),
        ]);
        if let Some(r) = self
            .reference_answer
            .as_deref()
            .filter(|r| !r.trim().is_empty())
        {
            b.insert("reference_answer".into(), r.to_string());
        }
        JudgeRequest::new(TemplateId::RubricSynthesis, b)
    }
}

/// A generator-emitted rubric object, exactly three keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedRubricItem {
    pub title: String,
    pub description: String,
    pub weight: i64,
}

/// A single rule violation, tied to an item when applicable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub rule: String,
    pub message: String,
}

impl Violation {
    fn at(index: usize, rule: &str, message: impl Into<String>) -> Self {
        Violation {
            index: Some(index),
            rule: rule.to_string(),
            message: message.into(),
        }
    }

    fn global(rule: &str, message: impl Into<String>) -> Self {
        Violation {
            index: None,
            rule: rule.to_string(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.index {
            Some(i) => write!(f, "item {i}: {} ({})", self.message, self.rule),
            None => write!(f, "{} ({})", self.message, self.rule),
        }
    }
}

/// Errors and warnings found while checking generated items.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn summary(&self) -> String {
        self.errors
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Items that passed validation, with their derived categories.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedItems {
    pub items: Vec<(GeneratedRubricItem, Category)>,
    pub warnings: Vec<Violation>,
}

impl ValidatedItems {
    /// Builds the rubric; aggregation weights come from the category map,
    /// never from the generator integers.
    pub fn into_rubric(self, prompt_id: impl Into<String>) -> Result<Rubric, RubricError> {
        let criteria = self
            .items
            .into_iter()
            .map(|(item, category)| {
                Criterion::new(item.title, item.description, category)?
                    .with_aggregation_weight(category_weight(category))?
                    .with_generator_weight(item.weight)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Rubric::new(prompt_id, criteria)
    }
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("task {0}: question is empty")]
    EmptyQuestion(String),
    #[error("task {id}: {source}")]
    Judge {
        id: String,
        #[source]
        source: JudgeError,
    },
    #[error("task {id}: {source}")]
    Rubric {
        id: String,
        #[source]
        source: RubricError,
    },
}

impl SynthesisError {
    /// Raw generator text from the last attempt, if any.
    pub fn raw(&self) -> Option<&str> {
        match self {
            SynthesisError::Judge {
                source: JudgeError::Exhausted { raw, .. },
                ..
            } => raw.as_deref(),
            _ => None,
        }
    }
}

/// Parses a (possibly fenced) JSON array of rubric objects. Every
/// structural problem is collected into the error.
pub fn parse_rubric_json(raw: &str) -> Result<Vec<GeneratedRubricItem>, ParseError> {
    let value = first_json_value(raw, '[')?;
    let Value::Array(entries) = value else {
        return Err(ParseError::new(
            "expected a JSON array of rubric objects",
            raw,
        ));
    };
    if entries.is_empty() {
        return Err(ParseError::new("rubric array is empty", raw));
    }
    let mut issues = Vec::new();
    let mut items = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let Value::Object(obj) = entry else {
            issues.push(format!("item {i}: not an object"));
            continue;
        };
        let mut ok = true;
        for key in obj.keys() {
            if !matches!(key.as_str(), "title" | "description" | "weight") {
                issues.push(format!("item {i}: unexpected key {key:?}"));
                ok = false;
            }
        }
        let title = match obj.get("title") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                issues.push(format!("item {i}: title is not a string"));
                None
            }
            None => {
                issues.push(format!("item {i}: missing key \"title\""));
                None
            }
        };
        let description = match obj.get("description") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                issues.push(format!("item {i}: description is not a string"));
                None
            }
            None => {
                issues.push(format!("item {i}: missing key \"description\""));
                None
            }
        };
        let weight = match obj.get("weight") {
            Some(w) => match w.as_i64() {
                Some(w) => Some(w),
                None => {
                    issues.push(format!("item {i}: weight is not an integer: {w}"));
                    None
                }
            },
            None => {
                issues.push(format!("item {i}: missing key \"weight\""));
                None
            }
        };
        if let (true, Some(title), Some(description), Some(weight)) =
            (ok, title, description, weight)
        {
            items.push(GeneratedRubricItem {
                title,
                description,
                weight,
            });
        }
    }
    if issues.is_empty() {
        Ok(items)
    } else {
        Err(ParseError::new(issues.join("; "), raw))
    }
}

/// Applies the count, prefix and weight-range rules. Title length outside
/// 2–4 words is only a warning.
pub fn validate_items(items: &[GeneratedRubricItem]) -> Result<ValidatedItems, ValidationReport> {
    let mut report = ValidationReport::default();
    if !ITEM_COUNT.contains(&items.len()) {
        report.errors.push(Violation::global(
            "item_count",
            format!(
                "expected {}–{} items, got {}",
                ITEM_COUNT.start(),
                ITEM_COUNT.end(),
                items.len()
            ),
        ));
    }
    let mut validated = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let words = item.title.split_whitespace().count();
        if !TITLE_WORDS.contains(&words) {
            report.warnings.push(Violation::at(
                i,
                "title_length",
                format!("title has {words} words, expected 2–4"),
            ));
        }
        let Some(category) = Category::from_description(&item.description) else {
            report.errors.push(Violation::at(
                i,
                "category_prefix",
                "description does not begin with a category prefix",
            ));
            continue;
        };
        if !category.accepts_generator_weight(item.weight) {
            let allowed = if category == Category::Pitfall {
                "-1 or -2"
            } else {
                "1–5"
            };
            report.errors.push(Violation::at(
                i,
                "weight_range",
                format!("{category} weight {} not in {allowed}", item.weight),
            ));
            continue;
        }
        validated.push((item.clone(), category));
    }
    if report.is_ok() {
        Ok(ValidatedItems {
            items: validated,
            warnings: report.warnings,
        })
    } else {
        Err(report)
    }
}

/// Parse then validate, as one fallible step (used for retries).
pub fn parse_and_validate(raw: &str) -> Result<ValidatedItems, ParseError> {
    let items = parse_rubric_json(raw)?;
    validate_items(&items).map_err(|report| ParseError::new(report.summary(), raw))
}

/// A generated rubric with its audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub rubric: Rubric,
    pub warnings: Vec<Violation>,
    pub attempts_used: u32,
    pub raw_text: String,
}

/// Generates and validates one rubric, re-asking up to `attempts` times.
pub fn synthesize(
    task: &SynthesisTask,
    gateway: &Gateway,
    attempts: u32,
) -> Result<SynthesisOutcome, SynthesisError> {
    if task.question.trim().is_empty() {
        return Err(SynthesisError::EmptyQuestion(task.id.clone()));
    }
    let (validated, raw_text, attempts_used) = gateway
        .judge_with(&task.request(), Some(attempts), parse_and_validate)
        .map_err(|source| SynthesisError::Judge {
            id: task.id.clone(),
            source,
        })?;
    let warnings = validated.warnings.clone();
    let rubric = validated
        .into_rubric(&task.id)
        .map_err(|source| SynthesisError::Rubric {
            id: task.id.clone(),
            source,
        })?;
    Ok(SynthesisOutcome {
        rubric,
        warnings,
        attempts_used,
        raw_text,
    })
}

/// Per-task line of the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub id: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub items: Option<usize>,
    pub attempts_used: u32,
    pub warnings: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub tasks: Vec<TaskReport>,
}

/// Runs many tasks concurrently; rubrics come back in input order with
/// failures omitted and described in the report.
pub fn synthesize_all(
    tasks: &[SynthesisTask],
    gateway: &Gateway,
    attempts: u32,
    max_in_flight: usize,
) -> (Vec<Rubric>, SynthesisReport) {
    let outcomes = map_bounded(tasks, max_in_flight, |_, t| {
        synthesize(t, gateway, attempts)
    });
    let mut rubrics = Vec::new();
    let mut lines = Vec::new();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                lines.push(TaskReport {
                    id: task.id.clone(),
                    ok: true,
                    items: Some(o.rubric.len()),
                    attempts_used: o.attempts_used,
                    warnings: o.warnings,
                    error: None,
                    raw_text: None,
                });
                rubrics.push(o.rubric);
            }
            Err(e) => lines.push(TaskReport {
                id: task.id.clone(),
                ok: false,
                items: None,
                attempts_used: match &e {
                    SynthesisError::Judge {
                        source: JudgeError::Exhausted { attempts, .. },
                        ..
                    } => *attempts,
                    _ => 0,
                },
                warnings: Vec::new(),
                raw_text: e.raw().map(str::to_string),
                error: Some(e.to_string()),
            }),
        }
    }
    let succeeded = rubrics.len();
    (
        rubrics,
        SynthesisReport {
            total: tasks.len(),
            succeeded,
            failed: tasks.len() - succeeded,
            tasks: lines,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(title: &str, description: &str, weight: i64) -> GeneratedRubricItem {
        GeneratedRubricItem {
            title: title.into(),
            description: description.into(),
            weight,
        }
    }

    fn valid_items(n: usize) -> Vec<GeneratedRubricItem> {
        (0..n)
            .map(|i| match i % 4 {
                0 => item("Key fact", "Essential Criteria: States the key fact.", 5),
                1 => item(
                    "Reasoning steps",
                    "Important Criteria: Explains the reasoning.",
                    4,
                ),
                2 => item("Concise style", "Optional Criteria: Remains concise.", 1),
                _ => item(
                    "Common error",
                    "Pitfall Criteria: Does not mention the caveat.",
                    -1,
                ),
            })
            .collect()
    }

    #[test]
    fn parses_fenced_single_item() {
        let raw = "```json\n[{\"title\":\"Final Answer\",\"description\":\"Essential Criteria: Includes a clear statement “The final answer is (B)”.\",\"weight\":5}]\n```";
        let items = parse_rubric_json(raw).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(
            Category::from_description(&items[0].description),
            Some(Category::Essential)
        );
    }

    #[test]
    fn rejects_extra_missing_and_mistyped_keys() {
        let extra =
            r#"[{"title":"A b","description":"Essential Criteria: x","weight":5,"notes":"n"}]"#;
        assert!(parse_rubric_json(extra)
            .unwrap_err()
            .reason
            .contains("notes"));
        let missing = r#"[{"title":"A b","weight":5}]"#;
        assert!(parse_rubric_json(missing)
            .unwrap_err()
            .reason
            .contains("description"));
        let float = r#"[{"title":"A b","description":"Essential Criteria: x","weight":4.5}]"#;
        assert!(parse_rubric_json(float).is_err());
        let title = r#"[{"title":3,"description":"Essential Criteria: x","weight":4}]"#;
        assert!(parse_rubric_json(title).is_err());
        assert!(parse_rubric_json("[]").is_err());
        assert!(parse_rubric_json("{\"title\": 1}").is_err());
    }

    #[test]
    fn count_bounds() {
        assert!(validate_items(&valid_items(7)).is_ok());
        assert!(validate_items(&valid_items(20)).is_ok());
        let six = validate_items(&valid_items(6)).unwrap_err();
        assert_eq!(six.errors[0].rule, "item_count");
        assert!(validate_items(&valid_items(21)).is_err());
    }

    #[test]
    fn weight_ranges() {
        let mut items = valid_items(8);
        items[0].weight = 6;
        let report = validate_items(&items).unwrap_err();
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].index, Some(0));
        assert_eq!(report.errors[0].rule, "weight_range");

        let mut items = valid_items(8);
        items[3].weight = -2;
        assert!(validate_items(&items).is_ok());
        items[3].weight = 1;
        assert!(validate_items(&items).is_err());
    }

    #[test]
    fn unknown_prefix_is_rejected_and_titles_warn() {
        let mut items = valid_items(8);
        items[1].description = "Explains the reasoning.".into();
        items[2].title = "Style".into();
        let report = validate_items(&items).unwrap_err();
        assert_eq!(report.errors[0].rule, "category_prefix");
        assert_eq!(report.warnings[0].index, Some(2));

        let mut items = valid_items(8);
        items[2].title = "Style".into();
        let ok = validate_items(&items).unwrap();
        assert_eq!(ok.warnings.len(), 1);
    }

    #[test]
    fn pitfall_item_maps_to_category_weight() {
        let rubric = validate_items(&valid_items(8))
            .unwrap()
            .into_rubric("q")
            .unwrap();
        let pitfall = &rubric.items[3];
        assert_eq!(pitfall.category, Category::Pitfall);
        assert_eq!(pitfall.generator_weight, Some(-1));
        assert_eq!(pitfall.aggregation_weight, 0.8);
        assert_eq!(rubric.items[0].aggregation_weight, 1.0);
    }
}

//! Offline judges.
//!
//! [`MockScripted`] replays canned replies. [`MockKeyword`] is a
//! deterministic rule-based judge that reads the same bindings a real judge
//! would see and answers every template:
//!
//! * a criterion is satisfied when the response contains all of its
//!   keywords (case-insensitive). Keywords come from an explicit table, else
//!   from the quoted phrases in the description. A criterion with neither is
//!   satisfied by any non-blank response. Pitfall keywords name the mistake,
//!   so a pitfall is satisfied when its keywords are absent;
//! * implicit rubric ratings are `1 + round(9 * weighted satisfaction)`;
//! * rubric-free Likert ratings are a constant;
//! * reference ratings track recall of the reference's content words.

use std::sync::Mutex;

use crate::rubric::{category_weight, Category};
use crate::templates::TemplateId;

use super::backend::{JudgeCall, Transport, TransportError};

type Rule = Box<dyn Fn(&JudgeCall<'_>) -> String + Send + Sync>;

/// Replays a fixed list of replies in order, repeating the last one once
/// the list is exhausted, or answers through a caller-supplied rule.
pub struct MockScripted {
    outputs: Vec<String>,
    cursor: Mutex<usize>,
    rule: Option<Rule>,
}

impl MockScripted {
    pub fn new(outputs: Vec<String>) -> Self {
        MockScripted {
            outputs,
            cursor: Mutex::new(0),
            rule: None,
        }
    }

    /// A judge that always replies with `reply`.
    pub fn constant(reply: impl Into<String>) -> Self {
        MockScripted::new(vec![reply.into()])
    }

    pub fn with_rule(rule: impl Fn(&JudgeCall<'_>) -> String + Send + Sync + 'static) -> Self {
        MockScripted {
            outputs: Vec::new(),
            cursor: Mutex::new(0),
            rule: Some(Box::new(rule)),
        }
    }
}

impl Transport for MockScripted {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError> {
        if let Some(rule) = &self.rule {
            return Ok(rule(call));
        }
        let mut cursor = self.cursor.lock().unwrap();
        let reply = self
            .outputs
            .get((*cursor).min(self.outputs.len().saturating_sub(1)))
            .cloned()
            .ok_or_else(|| TransportError::fatal("scripted mock has no replies"))?;
        *cursor += 1;
        Ok(reply)
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "because", "before", "being", "below",
    "between", "could", "doing", "during", "having", "other", "should", "their", "there", "these",
    "those", "through", "under", "until", "where", "which", "while", "would", "yours", "response",
    "answer", "question",
];

/// Lower-cased alphanumeric tokens of five or more characters, minus common
/// function words, deduplicated in first-seen order.
pub fn content_words(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 5 && !STOPWORDS.contains(&t.as_str()))
    {
        if !out.contains(&token) {
            out.push(token);
        }
    }
    out
}

/// Text inside straight or curly double quotes.
pub fn quoted_phrases(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (open, close) in [('"', '"'), ('“', '”')] {
        let mut rest = text;
        while let Some(i) = rest.find(open) {
            let after = &rest[i + open.len_utf8()..];
            let Some(j) = after.find(close) else { break };
            let phrase = after[..j].trim();
            if !phrase.is_empty() {
                out.push(phrase.to_string());
            }
            rest = &after[j + close.len_utf8()..];
        }
    }
    out
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

/// A rubric line as rendered for a judge: optional `- `, optional `[tag] `,
/// then the description.
struct RubricLine<'a> {
    category: Category,
    weight: f64,
    description: &'a str,
}

fn parse_rubric_line(line: &str) -> Option<RubricLine<'_>> {
    let line = line.trim();
    let line = line.strip_prefix("- ").unwrap_or(line);
    let (tag, description) = match line.strip_prefix('[').and_then(|r| r.split_once("] ")) {
        Some((tag, desc)) => (Some(tag), desc),
        None => (None, line),
    };
    if description.is_empty() {
        return None;
    }
    let tagged_category = tag.and_then(|t| Category::ALL.into_iter().find(|c| c.as_str() == t));
    let category = tagged_category
        .or_else(|| Category::from_description(description))
        .unwrap_or(Category::Essential);
    let weight = tag
        .and_then(|t| t.strip_prefix("weight="))
        .and_then(|w| w.parse::<f64>().ok())
        .filter(|w| *w > 0.0)
        .unwrap_or_else(|| category_weight(category));
    Some(RubricLine {
        category,
        weight,
        description,
    })
}

/// Deterministic rule-based judge. See the module docs for the rules.
#[derive(Debug, Clone)]
pub struct MockKeyword {
    table: Vec<(String, Vec<String>)>,
    constant_rating: i64,
}

impl Default for MockKeyword {
    fn default() -> Self {
        MockKeyword {
            table: Vec::new(),
            constant_rating: 5,
        }
    }
}

impl MockKeyword {
    pub fn new() -> Self {
        MockKeyword::default()
    }

    /// Criteria whose description contains `criterion_fragment` use
    /// `keyword` instead of their quoted phrases. Repeated calls with the same
    /// fragment add keywords.
    pub fn with_keyword(
        mut self,
        criterion_fragment: impl Into<String>,
        keyword: impl Into<String>,
    ) -> Self {
        let fragment = criterion_fragment.into();
        let keyword = keyword.into();
        match self.table.iter_mut().find(|(f, _)| *f == fragment) {
            Some((_, kws)) => kws.push(keyword),
            None => self.table.push((fragment, vec![keyword])),
        }
        self
    }

    /// Rating returned for rubric-free Likert prompts.
    pub fn with_constant_rating(mut self, rating: i64) -> Self {
        self.constant_rating = rating.clamp(1, 10);
        self
    }

    fn keywords_for(&self, description: &str) -> Vec<String> {
        if let Some((_, kws)) = self.table.iter().find(|(f, _)| contains_ci(description, f)) {
            return kws.clone();
        }
        quoted_phrases(description)
    }

    /// Verdict for one rendered criterion line against a response.
    pub fn criterion_satisfied(&self, criterion_line: &str, response: &str) -> bool {
        let Some(line) = parse_rubric_line(criterion_line) else {
            return false;
        };
        let keywords = self.keywords_for(line.description);
        if keywords.is_empty() {
            return !response.trim().is_empty();
        }
        let present = keywords.iter().all(|k| contains_ci(response, k));
        if line.category == Category::Pitfall {
            !present
        } else {
            present
        }
    }

    /// Weighted fraction of satisfied rubric lines.
    pub fn rubric_satisfaction(&self, rubric_list: &str, response: &str) -> f64 {
        let mut total = 0.0;
        let mut hit = 0.0;
        for raw in rubric_list.lines().filter(|l| !l.trim().is_empty()) {
            let Some(line) = parse_rubric_line(raw) else {
                continue;
            };
            total += line.weight;
            if self.criterion_satisfied(raw, response) {
                hit += line.weight;
            }
        }
        if total > 0.0 {
            hit / total
        } else {
            0.0
        }
    }

    fn rating_json(rating: i64) -> String {
        format!("```json\n{{\n  \"rating\": {rating}\n}}\n```")
    }

    fn scaled_rating(fraction: f64) -> i64 {
        1 + (9.0 * fraction.clamp(0.0, 1.0)).round() as i64
    }

    fn synthesize(question: &str, reference: Option<&str>) -> String {
        let source = reference.unwrap_or(question);
        let mut words = content_words(source);
        words.truncate(11);
        let mut items = Vec::new();
        for (i, w) in words.iter().enumerate() {
            let (category, weight) = match i {
                0 | 1 => (Category::Essential, 5),
                2 => (Category::Important, 4),
                3 => (Category::Important, 3),
                _ if i % 2 == 0 => (Category::Optional, 2),
                _ => (Category::Optional, 1),
            };
            items.push(serde_json::json!({
                "title": format!("Mentions {w}"),
                "description": format!("{} Mentions \"{w}\".", category.prefix()),
                "weight": weight,
            }));
        }
        let fillers = [
            (
                "Concise answer",
                "Optional Criteria: Remains concise and avoids unnecessary detail.",
            ),
            (
                "Reasoning first",
                "Important Criteria: Presents the explanation before stating the final answer.",
            ),
            (
                "Clear structure",
                "Optional Criteria: Organizes the answer in a clear order.",
            ),
            (
                "Direct answer",
                "Important Criteria: Answers the question directly.",
            ),
            (
                "Plain language",
                "Optional Criteria: Uses plain language a non-expert can follow.",
            ),
            (
                "States conclusion",
                "Important Criteria: States a clear conclusion.",
            ),
        ];
        for (title, description) in fillers.iter().take(6usize.saturating_sub(items.len())) {
            let weight = if description.starts_with("Important") {
                3
            } else {
                1
            };
            items.push(
                serde_json::json!({"title": title, "description": description, "weight": weight}),
            );
        }
        items.push(serde_json::json!({
            "title": "Avoids guessing",
            "description": "Pitfall Criteria: Recommends \"guessing\" instead of reasoning from the facts.",
            "weight": -1,
        }));
        format!(
            "```json\n{}\n```",
            serde_json::to_string_pretty(&items).expect("rubric items serialize")
        )
    }

    fn perturb(ideal: &str) -> String {
        let ideal = ideal.trim();
        let sentences: Vec<&str> = ideal
            .split_inclusive(". ")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let added = "General advice applies to most situations.";
        let (kept, removed) = if sentences.len() >= 2 {
            let (last, head) = sentences.split_last().expect("at least two sentences");
            (head.join(" "), Some(*last))
        } else {
            (ideal.to_string(), None)
        };
        let perturbed = format!("{kept} {added}");
        let mut out = String::from(
            "[reasoning]: Remove the closing sentence to reduce completeness and add a vague generalization to reduce specificity.\n",
        );
        out.push_str(&format!("[perturbed_completion]: {perturbed}\n"));
        out.push_str(&format!("[chunks_added]:\n- {added}\n"));
        out.push_str("[chunks_removed]:\n");
        if let Some(r) = removed {
            out.push_str(&format!("- {r}\n"));
        }
        out
    }
}

impl Transport for MockKeyword {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError> {
        let b = call.bindings;
        let get = |k: &str| b.get(k).map(String::as_str).unwrap_or("");
        let reply = match call.template_id {
            TemplateId::ImplicitRubricLikert => Self::rating_json(Self::scaled_rating(
                self.rubric_satisfaction(get("rubric_list_string"), get("response")),
            )),
            TemplateId::SimpleLikert => Self::rating_json(self.constant_rating),
            TemplateId::ReferenceLikert => {
                let reference = content_words(get("reference"));
                let response = get("response").to_lowercase();
                let recall = if reference.is_empty() {
                    0.0
                } else {
                    reference
                        .iter()
                        .filter(|w| response.contains(w.as_str()))
                        .count() as f64
                        / reference.len() as f64
                };
                Self::rating_json(Self::scaled_rating(recall))
            }
            TemplateId::CriterionBinary => {
                let ok = self.criterion_satisfied(get("criterion"), get("response"));
                format!("```json\n{{\"satisfied\": {ok}}}\n```")
            }
            TemplateId::GpqaVerifier => {
                let response = get("response_text");
                let label = get("correct_answer").trim();
                let text = get("correct_answer_text").trim();
                let hit = (!text.is_empty() && contains_ci(response, text))
                    || (!label.is_empty() && response.contains(&format!("({label})")));
                if hit { "Yes" } else { "No" }.to_string()
            }
            TemplateId::RubricSynthesis => {
                let reference = b
                    .get("reference_answer")
                    .map(String::as_str)
                    .filter(|r| !r.trim().is_empty());
                Self::synthesize(get("question"), reference)
            }
            TemplateId::Perturbation => Self::perturb(get("ideal_completion")),
        };
        Ok(reply)
    }
}

//! Rubric data model and the reward aggregation math.
//!
//! A [`Rubric`] is an ordered checklist of [`Criterion`] items. Explicit
//! aggregation turns one binary verdict per item into a normalized weighted
//! score; RLVR exact-match rewards are the single-item, unit-weight case.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by rubric construction and aggregation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RubricError {
    /// A value failed a field-level invariant.
    #[error("invalid rubric: {0}")]
    Validation(String),
    /// The caller broke an operation precondition (e.g. verdict coverage).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Input is well-formed but cannot be aggregated.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// Importance level of a rubric item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Essential,
    Important,
    Optional,
    Pitfall,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Essential,
        Category::Important,
        Category::Optional,
        Category::Pitfall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Essential => "Essential",
            Category::Important => "Important",
            Category::Optional => "Optional",
            Category::Pitfall => "Pitfall",
        }
    }

    /// The description prefix a synthesized item of this category carries,
    /// e.g. `"Pitfall Criteria:"`.
    pub fn prefix(self) -> &'static str {
        match self {
            Category::Essential => "Essential Criteria:",
            Category::Important => "Important Criteria:",
            Category::Optional => "Optional Criteria:",
            Category::Pitfall => "Pitfall Criteria:",
        }
    }

    /// Derives the category from a description's leading prefix.
    pub fn from_description(description: &str) -> Option<Category> {
        let trimmed = description.trim_start();
        Category::ALL
            .into_iter()
            .find(|c| trimmed.starts_with(c.prefix()))
    }

    /// Whether `weight` is an allowed synthesis-time integer weight.
    pub fn accepts_generator_weight(self, weight: i64) -> bool {
        match self {
            Category::Pitfall => weight == -1 || weight == -2,
            _ => (1..=5).contains(&weight),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default explicit-aggregation weight for a category.
///
/// Pitfalls are phrased positively ("avoids X"), so a satisfied pitfall adds
/// 0.8 to the numerator and an unsatisfied one only enlarges the denominator.
pub fn category_weight(category: Category) -> f64 {
    match category {
        Category::Essential => 1.0,
        Category::Important => 0.7,
        Category::Optional => 0.3,
        Category::Pitfall => 0.8,
    }
}

/// One checklist item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CriterionRepr")]
pub struct Criterion {
    pub title: String,
    pub description: String,
    pub category: Category,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_weight: Option<i64>,
    pub aggregation_weight: f64,
}

#[derive(Deserialize)]
struct CriterionRepr {
    title: String,
    description: String,
    category: Category,
    #[serde(default)]
    generator_weight: Option<i64>,
    aggregation_weight: f64,
}

impl TryFrom<CriterionRepr> for Criterion {
    type Error = RubricError;

    fn try_from(r: CriterionRepr) -> Result<Self, Self::Error> {
        let c = Criterion {
            title: r.title,
            description: r.description,
            category: r.category,
            generator_weight: r.generator_weight,
            aggregation_weight: r.aggregation_weight,
        };
        c.validate()?;
        Ok(c)
    }
}

impl Criterion {
    /// Builds a criterion whose description carries its category prefix.
    /// The aggregation weight defaults to [`category_weight`].
    pub fn new(
        title: impl Into<String>,
        description: impl Into<String>,
        category: Category,
    ) -> Result<Self, RubricError> {
        let description = description.into();
        if Category::from_description(&description) != Some(category) {
            return Err(RubricError::Validation(format!(
                "description must begin with {:?}: {description:?}",
                category.prefix()
            )));
        }
        let c = Criterion {
            title: title.into(),
            description,
            category,
            generator_weight: None,
            aggregation_weight: category_weight(category),
        };
        c.validate()?;
        Ok(c)
    }

    /// Builds a criterion with free-form description text (no category
    /// prefix), as used by the fixed generic rubric.
    pub fn unprefixed(
        title: impl Into<String>,
        description: impl Into<String>,
        category: Category,
        aggregation_weight: f64,
    ) -> Result<Self, RubricError> {
        let c = Criterion {
            title: title.into(),
            description: description.into(),
            category,
            generator_weight: None,
            aggregation_weight,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_generator_weight(mut self, weight: i64) -> Result<Self, RubricError> {
        self.generator_weight = Some(weight);
        self.validate()?;
        Ok(self)
    }

    pub fn with_aggregation_weight(mut self, weight: f64) -> Result<Self, RubricError> {
        self.aggregation_weight = weight;
        self.validate()?;
        Ok(self)
    }

    /// Checks field invariants. A description that carries a category prefix
    /// must agree with `category`.
    pub fn validate(&self) -> Result<(), RubricError> {
        if !(self.aggregation_weight.is_finite() && self.aggregation_weight > 0.0) {
            return Err(RubricError::Validation(format!(
                "aggregation_weight must be positive and finite, got {}",
                self.aggregation_weight
            )));
        }
        if let Some(prefixed) = Category::from_description(&self.description) {
            if prefixed != self.category {
                return Err(RubricError::Validation(format!(
                    "description prefix says {prefixed} but category is {}",
                    self.category
                )));
            }
        }
        if let Some(w) = self.generator_weight {
            if !self.category.accepts_generator_weight(w) {
                return Err(RubricError::Validation(format!(
                    "generator_weight {w} out of range for {}",
                    self.category
                )));
            }
        }
        Ok(())
    }
}

/// A prompt's ordered set of criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RubricRepr")]
pub struct Rubric {
    pub prompt_id: String,
    pub items: Vec<Criterion>,
}

#[derive(Deserialize)]
struct RubricRepr {
    prompt_id: String,
    items: Vec<Criterion>,
}

impl TryFrom<RubricRepr> for Rubric {
    type Error = RubricError;

    fn try_from(r: RubricRepr) -> Result<Self, Self::Error> {
        Rubric::new(r.prompt_id, r.items)
    }
}

impl Rubric {
    pub fn new(prompt_id: impl Into<String>, items: Vec<Criterion>) -> Result<Self, RubricError> {
        if items.is_empty() {
            return Err(RubricError::Validation("rubric has no items".into()));
        }
        for item in &items {
            item.validate()?;
        }
        Ok(Rubric {
            prompt_id: prompt_id.into(),
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.items.iter().map(|c| c.aggregation_weight).sum()
    }
}

/// Binary judgement for one rubric item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion_index: usize,
    pub satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl CriterionVerdict {
    pub fn new(criterion_index: usize, satisfied: bool) -> Self {
        CriterionVerdict {
            criterion_index,
            satisfied,
            rationale: None,
        }
    }

    /// Verdicts for indices `0..n` from a slice of booleans.
    pub fn from_flags(flags: &[bool]) -> Vec<CriterionVerdict> {
        flags
            .iter()
            .enumerate()
            .map(|(i, &s)| CriterionVerdict::new(i, s))
            .collect()
    }
}

/// Reward computation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardMethod {
    #[serde(alias = "simple-likert")]
    SimpleLikert,
    #[serde(alias = "reference-likert")]
    ReferenceLikert,
    #[serde(alias = "predefined-rar")]
    PredefinedRaR,
    #[serde(alias = "rar-explicit")]
    RaRExplicit,
    #[serde(alias = "rar-implicit")]
    RaRImplicit,
    #[serde(rename = "RLVR", alias = "rlvr")]
    Rlvr,
}

impl RewardMethod {
    pub const ALL: [RewardMethod; 6] = [
        RewardMethod::SimpleLikert,
        RewardMethod::ReferenceLikert,
        RewardMethod::PredefinedRaR,
        RewardMethod::RaRExplicit,
        RewardMethod::RaRImplicit,
        RewardMethod::Rlvr,
    ];

    /// Kebab-case name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            RewardMethod::SimpleLikert => "simple-likert",
            RewardMethod::ReferenceLikert => "reference-likert",
            RewardMethod::PredefinedRaR => "predefined-rar",
            RewardMethod::RaRExplicit => "rar-explicit",
            RewardMethod::RaRImplicit => "rar-implicit",
            RewardMethod::Rlvr => "rlvr",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<RewardMethod> {
        RewardMethod::ALL.into_iter().find(|m| m.cli_name() == name)
    }
}

impl fmt::Display for RewardMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Scalar reward for a (prompt, response, method) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub prompt_id: String,
    pub response_id: String,
    pub method: RewardMethod,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_judge_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<CriterionVerdict>>,
}

/// Normalized weighted sum of satisfied criteria.
///
/// `verdicts` must cover every rubric index exactly once, in any order.
pub fn explicit_reward(rubric: &Rubric, verdicts: &[CriterionVerdict]) -> Result<f64, RubricError> {
    let n = rubric.items.len();
    if verdicts.len() != n {
        return Err(RubricError::Contract(format!(
            "expected {n} verdicts, got {}",
            verdicts.len()
        )));
    }
    let mut seen: Vec<Option<bool>> = vec![None; n];
    for v in verdicts {
        match seen.get_mut(v.criterion_index) {
            None => {
                return Err(RubricError::Contract(format!(
                    "verdict index {} out of bounds for {n} items",
                    v.criterion_index
                )))
            }
            Some(Some(_)) => {
                return Err(RubricError::Contract(format!(
                    "duplicate verdict for index {}",
                    v.criterion_index
                )))
            }
            Some(slot) => *slot = Some(v.satisfied),
        }
    }

    let total = rubric.total_weight();
    if total.is_nan() || total <= 0.0 {
        return Err(RubricError::Degenerate("total weight is zero".into()));
    }
    let satisfied: f64 = rubric
        .items
        .iter()
        .zip(&seen)
        .filter(|(_, s)| **s == Some(true))
        .map(|(c, _)| c.aggregation_weight)
        .sum();
    Ok((satisfied / total).clamp(0.0, 1.0))
}

/// Verifiable exact-match reward.
pub fn rlvr_reward(matched: bool) -> f64 {
    if matched {
        1.0
    } else {
        0.0
    }
}

/// How a 1–10 Likert rating maps onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertNorm {
    /// `(s - 1) / 9`: both scale endpoints reach 0 and 1.
    #[default]
    Affine,
    /// `s / 10`.
    DivideByTen,
}

impl LikertNorm {
    pub fn apply(self, rating: i64) -> Result<f64, RubricError> {
        if !(1..=10).contains(&rating) {
            return Err(RubricError::Validation(format!(
                "likert rating {rating} outside 1..=10"
            )));
        }
        Ok(match self {
            LikertNorm::Affine => (rating - 1) as f64 / 9.0,
            LikertNorm::DivideByTen => rating as f64 / 10.0,
        })
    }
}

/// Maps a 1–10 rating onto `[0, 1]` with `(s - 1) / 9`.
pub fn normalize_likert(rating: i64) -> Result<f64, RubricError> {
    LikertNorm::Affine.apply(rating)
}

//! Parsers for structured judge output.

use serde_json::Value;
use thiserror::Error;

/// A judge reply that does not fit the expected grammar. Carries the raw
/// text for auditing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason}")]
pub struct ParseError {
    pub reason: String,
    pub raw: String,
}

impl ParseError {
    pub fn new(reason: impl Into<String>, raw: &str) -> Self {
        ParseError {
            reason: reason.into(),
            raw: raw.to_string(),
        }
    }
}

/// Removes one surrounding ```` ```json ```` / ```` ``` ```` fence if present.
pub fn strip_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(body) = t.strip_prefix("```") else {
        return t;
    };
    let body = body
        .strip_prefix("json")
        .or_else(|| body.strip_prefix("JSON"))
        .unwrap_or(body);
    let body = body.trim();
    body.strip_suffix("```").unwrap_or(body).trim()
}

/// Deserializes the first JSON value that starts at the first occurrence of
/// `open` (`{` or `[`).
pub fn first_json_value(raw: &str, open: char) -> Result<Value, ParseError> {
    let body = strip_fence(raw);
    let start = body
        .find(open)
        .ok_or_else(|| ParseError::new(format!("no JSON {open} found"), raw))?;
    serde_json::Deserializer::from_str(&body[start..])
        .into_iter::<Value>()
        .next()
        .ok_or_else(|| ParseError::new("empty JSON input", raw))?
        .map_err(|e| ParseError::new(format!("malformed JSON: {e}"), raw))
}

fn first_object(raw: &str) -> Result<serde_json::Map<String, Value>, ParseError> {
    match first_json_value(raw, '{')? {
        Value::Object(map) => Ok(map),
        _ => Err(ParseError::new("expected a JSON object", raw)),
    }
}

/// Extracts the integer `"rating"` (1..=10) from a judge reply.
pub fn parse_rating(raw: &str) -> Result<i64, ParseError> {
    let obj = first_object(raw)?;
    let value = obj
        .get("rating")
        .ok_or_else(|| ParseError::new("missing \"rating\" key", raw))?;
    let rating = value
        .as_i64()
        .ok_or_else(|| ParseError::new(format!("rating is not an integer: {value}"), raw))?;
    if !(1..=10).contains(&rating) {
        return Err(ParseError::new(
            format!("rating {rating} outside 1..=10"),
            raw,
        ));
    }
    Ok(rating)
}

/// Extracts the boolean `"satisfied"` from a per-criterion judge reply.
pub fn parse_satisfied(raw: &str) -> Result<bool, ParseError> {
    let obj = first_object(raw)?;
    obj.get("satisfied")
        .ok_or_else(|| ParseError::new("missing \"satisfied\" key", raw))?
        .as_bool()
        .ok_or_else(|| ParseError::new("\"satisfied\" is not a boolean", raw))
}

/// Strict `Yes` / `No` answer, surrounding whitespace allowed.
pub fn parse_yes_no(raw: &str) -> Result<bool, ParseError> {
    match raw.trim() {
        "Yes" => Ok(true),
        "No" => Ok(false),
        other => Err(ParseError::new(
            format!("expected Yes or No, got {other:?}"),
            raw,
        )),
    }
}

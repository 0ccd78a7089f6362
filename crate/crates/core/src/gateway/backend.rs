//! Backend descriptors and the transport trait behind them.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::templates::{Bindings, RenderedPrompt, TemplateId};

/// Kind of evaluator behind a backend name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    MockKeyword,
    MockScripted,
}

/// A named judge with its call parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeBackend {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
}

fn default_attempts() -> u32 {
    3
}

impl JudgeBackend {
    pub fn mock(name: impl Into<String>, kind: BackendKind) -> Self {
        JudgeBackend {
            name: name.into(),
            kind,
            endpoint: None,
            model_id: None,
            temperature: 0.0,
            max_attempts: default_attempts(),
        }
    }

    pub fn remote(
        name: impl Into<String>,
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Self {
        JudgeBackend {
            name: name.into(),
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            model_id: Some(model_id.into()),
            temperature: 0.0,
            max_attempts: default_attempts(),
        }
    }

    pub fn with_max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    /// Returns every violated invariant, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push("name must not be empty".to_string());
        }
        if self.kind == BackendKind::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                out.push("remote backend requires endpoint".to_string());
            }
            if self.model_id.as_deref().is_none_or(str::is_empty) {
                out.push("remote backend requires model_id".to_string());
            }
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            out.push(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        if self.max_attempts == 0 {
            out.push("max_attempts must be >= 1".to_string());
        }
        out
    }
}

/// Everything a transport may look at for one attempt.
#[derive(Debug, Clone, Copy)]
pub struct JudgeCall<'a> {
    pub template_id: TemplateId,
    pub bindings: &'a Bindings,
    pub prompt: &'a RenderedPrompt,
    /// 1-based attempt number.
    pub attempt: u32,
}

/// Failure to obtain any text from a backend.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: false,
        }
    }
}

/// Produces raw judge text for a rendered prompt.
pub trait Transport: Send + Sync {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError>;
}

/// OpenAI-style `POST <endpoint>/chat/completions` client.
pub struct RemoteChat {
    url: String,
    model: String,
    temperature: f64,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteChat {
    pub fn new(
        endpoint: &str,
        model: &str,
        temperature: f64,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteChat {
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            temperature,
            api_key: api_key.into(),
            agent,
        }
    }

    /// Request body for one prompt.
    pub fn request_body(&self, prompt: &RenderedPrompt) -> serde_json::Value {
        let mut messages = Vec::new();
        if !prompt.system.is_empty() {
            messages.push(json!({"role": "system", "content": prompt.system}));
        }
        messages.push(json!({"role": "user", "content": prompt.user}));
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        })
    }
}

impl Transport for RemoteChat {
    fn complete(&self, call: &JudgeCall<'_>) -> Result<String, TransportError> {
        let body = self.request_body(call.prompt);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| {
                TransportError::retryable(format!("request to {} failed: {e}", self.url))
            })?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::retryable(format!("reading response body: {e}")))?;
        if status == 429 || status >= 500 {
            return Err(TransportError::retryable(format!("HTTP {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            return Err(TransportError::fatal(format!("HTTP {status}: {text}")));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| TransportError::retryable(format!("invalid completion JSON: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                TransportError::retryable("completion has no choices[0].message.content")
            })
    }
}

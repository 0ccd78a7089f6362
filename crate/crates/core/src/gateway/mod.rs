//! Judge gateway: renders prompts, dispatches them to a backend, parses the
//! structured verdict, and handles caching, retries and bounded fan-out.

pub mod backend;
pub mod cache;
pub mod mock;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{BackendKind, JudgeBackend, JudgeCall, RemoteChat, Transport, TransportError};
pub use cache::{CacheEntry, RequestMeta, ResponseCache};
pub use mock::{MockKeyword, MockScripted};

use crate::fanout::{map_bounded, Limiter};
use crate::parse::{parse_rating, parse_satisfied, parse_yes_no, ParseError};
use crate::rubric::Criterion;
use crate::templates::{
    bindings, render_criterion, render_template, Bindings, RubricRendering, TemplateError,
    TemplateId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("judge failed after {attempts} attempt(s): {reason}")]
    Exhausted {
        attempts: u32,
        reason: String,
        /// Last raw text received, if any.
        raw: Option<String>,
    },
    #[error("backend error: {0}")]
    Transport(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("template {0:?} does not produce a {1}")]
    WrongTemplate(TemplateId, &'static str),
}

/// What to do with a sample whose judging failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Stop the run with an error.
    Abort,
    /// Skip the sample and count it as a failure.
    Drop,
}

/// A template plus its bindings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template_id: TemplateId,
    pub bindings: Bindings,
}

impl JudgeRequest {
    pub fn new(template_id: TemplateId, bindings: Bindings) -> Self {
        JudgeRequest {
            template_id,
            bindings,
        }
    }

    pub fn meta(&self, backend: &JudgeBackend) -> RequestMeta {
        RequestMeta {
            backend: backend.name.clone(),
            model_id: backend.model_id.clone(),
            template_id: self.template_id,
            bindings: self.bindings.clone(),
            temperature: backend.temperature,
        }
    }

    pub fn cache_key(&self, backend: &JudgeBackend) -> String {
        self.meta(backend).digest()
    }
}

/// Parsed judge output. Likert templates populate `rating`; binary
/// templates populate `binary`; generator templates populate neither.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rating: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary: Option<bool>,
    pub raw_text: String,
    pub attempts_used: u32,
}

#[derive(Debug, Clone)]
struct Completed {
    raw: String,
    attempts_used: u32,
}

type Flight = Arc<OnceLock<Result<Completed, JudgeError>>>;

/// Shared entry point for all judge traffic of one backend.
pub struct Gateway {
    backend: JudgeBackend,
    transport: Arc<dyn Transport>,
    cache: ResponseCache,
    inflight: Mutex<HashMap<String, Flight>>,
    limiter: Limiter,
    calls: AtomicUsize,
    backoff: Duration,
    rendering: RubricRendering,
}

impl Gateway {
    pub fn new(backend: JudgeBackend, transport: Arc<dyn Transport>) -> Self {
        Gateway {
            backend,
            transport,
            cache: ResponseCache::in_memory(),
            inflight: Mutex::default(),
            limiter: Limiter::new(usize::MAX),
            calls: AtomicUsize::new(0),
            backoff: Duration::from_millis(250),
            rendering: RubricRendering::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    /// Caps concurrent backend calls across all callers.
    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    /// Base delay before retrying a transport error; doubles per attempt.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn with_rubric_rendering(mut self, mode: RubricRendering) -> Self {
        self.rendering = mode;
        self
    }

    pub fn backend(&self) -> &JudgeBackend {
        &self.backend
    }

    pub fn rubric_rendering(&self) -> RubricRendering {
        self.rendering
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Number of transport calls made so far (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Core path: cache lookup, single-flight dispatch with retries, cache
    /// fill. `accept` decides whether a raw reply is usable; rejected
    /// replies are re-asked until `attempts` is spent.
    fn complete(
        &self,
        req: &JudgeRequest,
        attempts: u32,
        accept: &(dyn Fn(&str) -> Result<(), ParseError> + Sync),
    ) -> Result<Completed, JudgeError> {
        let meta = req.meta(&self.backend);
        let key = meta.digest();
        if let Some(hit) = self.cache.get(&key) {
            if accept(&hit.raw_text).is_ok() {
                return Ok(Completed {
                    raw: hit.raw_text,
                    attempts_used: hit.attempts_used,
                });
            }
        }

        let flight = {
            let mut map = self.inflight.lock().unwrap();
            map.entry(key.clone()).or_default().clone()
        };
        let outcome = flight
            .get_or_init(|| {
                let done = self.dispatch(req, attempts, accept)?;
                self.cache
                    .put(CacheEntry {
                        key: key.clone(),
                        raw_text: done.raw.clone(),
                        attempts_used: done.attempts_used,
                        request: meta.clone(),
                    })
                    .map_err(|e| JudgeError::Cache(e.to_string()))?;
                Ok(done)
            })
            .clone();
        {
            let mut map = self.inflight.lock().unwrap();
            if map.get(&key).is_some_and(|f| Arc::ptr_eq(f, &flight)) {
                map.remove(&key);
            }
        }
        outcome
    }

    fn dispatch(
        &self,
        req: &JudgeRequest,
        attempts: u32,
        accept: &(dyn Fn(&str) -> Result<(), ParseError> + Sync),
    ) -> Result<Completed, JudgeError> {
        let prompt = render_template(req.template_id, &req.bindings)?;
        let attempts = attempts.max(1);
        let mut last_reason = String::new();
        let mut last_raw = None;
        for attempt in 1..=attempts {
            let call = JudgeCall {
                template_id: req.template_id,
                bindings: &req.bindings,
                prompt: &prompt,
                attempt,
            };
            let reply = {
                let _permit = self.limiter.acquire();
                self.calls.fetch_add(1, Ordering::SeqCst);
                self.transport.complete(&call)
            };
            match reply {
                Ok(raw) => match accept(&raw) {
                    Ok(()) => {
                        return Ok(Completed {
                            raw,
                            attempts_used: attempt,
                        })
                    }
                    Err(e) => {
                        log::debug!(
                            "{}: unusable reply on attempt {attempt}: {e}",
                            self.backend.name
                        );
                        last_reason = e.reason;
                        last_raw = Some(raw);
                    }
                },
                Err(e) if !e.retryable => return Err(JudgeError::Transport(e.message)),
                Err(e) => {
                    log::warn!(
                        "{}: transport error on attempt {attempt}: {e}",
                        self.backend.name
                    );
                    last_reason = e.message;
                    if attempt < attempts {
                        std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
                    }
                }
            }
        }
        Err(JudgeError::Exhausted {
            attempts,
            reason: last_reason,
            raw: last_raw,
        })
    }

    /// Runs a request and parses the reply with `parse`, retrying replies
    /// that fail to parse. `attempts` overrides the backend's budget.
    pub fn judge_with<T>(
        &self,
        req: &JudgeRequest,
        attempts: Option<u32>,
        parse: impl Fn(&str) -> Result<T, ParseError> + Sync,
    ) -> Result<(T, String, u32), JudgeError> {
        let budget = attempts.unwrap_or(self.backend.max_attempts);
        let done = self.complete(req, budget, &|raw| parse(raw).map(|_| ()))?;
        let value = parse(&done.raw).map_err(|e| JudgeError::Exhausted {
            attempts: done.attempts_used,
            reason: e.reason,
            raw: Some(done.raw.clone()),
        })?;
        Ok((value, done.raw, done.attempts_used))
    }

    /// Runs any request, parsing according to its template kind.
    pub fn judge(&self, req: &JudgeRequest) -> Result<JudgmentResult, JudgeError> {
        match req.template_id {
            t if t.is_likert() => {
                let (rating, raw_text, attempts_used) = self.judge_with(req, None, parse_rating)?;
                Ok(JudgmentResult {
                    rating: Some(rating),
                    binary: None,
                    raw_text,
                    attempts_used,
                })
            }
            TemplateId::CriterionBinary | TemplateId::GpqaVerifier => {
                let parse = if req.template_id == TemplateId::CriterionBinary {
                    parse_satisfied
                } else {
                    parse_yes_no
                };
                let (b, raw_text, attempts_used) = self.judge_with(req, None, parse)?;
                Ok(JudgmentResult {
                    rating: None,
                    binary: Some(b),
                    raw_text,
                    attempts_used,
                })
            }
            _ => {
                let ((), raw_text, attempts_used) = self.judge_with(req, None, |_| Ok(()))?;
                Ok(JudgmentResult {
                    rating: None,
                    binary: None,
                    raw_text,
                    attempts_used,
                })
            }
        }
    }

    /// Likert judgement with one of the three rating templates.
    pub fn judge_likert(
        &self,
        template_id: TemplateId,
        bindings: Bindings,
    ) -> Result<JudgmentResult, JudgeError> {
        if !template_id.is_likert() {
            return Err(JudgeError::WrongTemplate(template_id, "likert rating"));
        }
        self.judge(&JudgeRequest::new(template_id, bindings))
    }

    /// Binary verdict for a single criterion.
    pub fn judge_criterion(
        &self,
        prompt: &str,
        response: &str,
        criterion: &Criterion,
    ) -> Result<JudgmentResult, JudgeError> {
        let req = criterion_request(prompt, response, criterion, self.rendering);
        self.judge(&req)
    }

    /// Judges every request with at most `max_in_flight` outstanding.
    /// Failures are reported per position.
    pub fn batch_judge(
        &self,
        requests: &[JudgeRequest],
        max_in_flight: usize,
    ) -> Vec<Result<JudgmentResult, JudgeError>> {
        map_bounded(requests, max_in_flight, |_, req| self.judge(req))
    }
}

/// The per-criterion yes/no request.
pub fn criterion_request(
    prompt: &str,
    response: &str,
    criterion: &Criterion,
    mode: RubricRendering,
) -> JudgeRequest {
    JudgeRequest::new(
        TemplateId::CriterionBinary,
        bindings([
            ("prompt", prompt.to_string()),
            ("response", response.to_string()),
            ("criterion", render_criterion(criterion, mode)),
        ]),
    )
}

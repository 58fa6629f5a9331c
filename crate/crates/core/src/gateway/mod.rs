//! Prompt assembly and LLM execution.
//!
//! A [`Gateway`] wraps a [`Backend`] with retry, backoff, bounded
//! parallelism and call accounting. Two backends ship: [`HttpBackend`] for
//! OpenAI-compatible chat-completion endpoints and [`MockBackend`], which
//! replays fixture files keyed by prompt hash or keyword rules.

mod http;
mod json;
mod mock;
mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use http::HttpBackend;
pub use json::{
    extract_json, extract_results, parse_results_json, render_results_json, FieldKind, FieldSpec, ParsedResults,
    RecordSchema, RecordViolation,
};
pub use mock::{prompt_hash, MockBackend};
pub use prompt::{PromptEnvelope, PromptRow, Resource, ResourceBody};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("server error {status} after {attempts} attempt(s): {body}")]
    Server { status: u16, attempts: u32, body: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request rejected as unauthorized (HTTP {0})")]
    Unauthorized(u16),
    #[error("no API key: {0}")]
    AuthMissing(String),
    #[error("prompt exceeds the model context: {0}")]
    ChunkTooLarge(String),
    #[error("no mock fixture for prompt {hash}")]
    NotFixtured { hash: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("invalid resource tag `{0}`")]
    InvalidTag(String),
    #[error("no JSON object found in response")]
    NoJsonFound,
    #[error("response JSON has no `results` root")]
    MissingResultsRoot,
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
}

impl GatewayError {
    fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::RateLimited { .. } | Self::Server { .. })
    }

    fn with_attempts(self, n: u32) -> Self {
        match self {
            Self::Transport { message, .. } => Self::Transport { attempts: n, message },
            Self::RateLimited { .. } => Self::RateLimited { attempts: n },
            Self::Server { status, body, .. } => Self::Server { status, attempts: n, body },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmRequestParams {
    pub model_id: String,
    pub temperature: f64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    #[serde(with = "millis")]
    pub backoff: Duration,
    pub system_message: Option<String>,
    pub max_tokens: Option<u32>,
}

impl Default for LlmRequestParams {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o".to_string(),
            temperature: 0.0,
            max_retries: 2,
            backoff: Duration::from_secs(1),
            system_message: Some(
                "You are a safety requirements engineering assistant. Reply with JSON only.".to_string(),
            ),
            max_tokens: None,
        }
    }
}

impl LlmRequestParams {
    pub fn backoff_before_retry(&self, retry: u32) -> Duration {
        self.backoff.saturating_mul(2u32.saturating_pow(retry))
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

/// One raw reply from a backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub finish_reason: Option<String>,
    pub usage: Option<Usage>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), finish_reason: Some("stop".into()), usage: None }
    }
}

pub trait Backend: Send + Sync {
    /// One attempt. Retry policy belongs to the [`Gateway`].
    fn complete(&self, prompt: &str, params: &LlmRequestParams) -> Result<Completion, GatewayError>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResultStatus {
    Parsed,
    /// Parsed, but the `results` container held nothing.
    Empty,
    ParseFailed(String),
}

/// A reply plus the records found under its `results` root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResult {
    pub raw_text: String,
    pub records: Vec<Map<String, Value>>,
    pub violations: Vec<RecordViolation>,
    pub repairs: Vec<String>,
    pub status: ResultStatus,
    pub usage: Option<Usage>,
}

impl LlmResult {
    pub fn from_completion(completion: Completion, schema: &RecordSchema) -> Self {
        let Completion { text, usage, .. } = completion;
        match parse_results_json(&text, schema) {
            Ok(p) => {
                let status = if p.records.is_empty() && p.violations.is_empty() {
                    ResultStatus::Empty
                } else {
                    ResultStatus::Parsed
                };
                Self { raw_text: text, records: p.records, violations: p.violations, repairs: p.repairs, status, usage }
            }
            Err(e) => Self {
                raw_text: text,
                records: Vec::new(),
                violations: Vec::new(),
                repairs: Vec::new(),
                status: ResultStatus::ParseFailed(e.to_string()),
                usage,
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        !matches!(self.status, ResultStatus::ParseFailed(_))
    }
}

/// Shared front door to a backend.
pub struct Gateway {
    backend: Box<dyn Backend>,
    params: LlmRequestParams,
    max_in_flight: usize,
    calls: AtomicUsize,
    sleep: fn(Duration),
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("params", &self.params)
            .field("max_in_flight", &self.max_in_flight)
            .field("calls", &self.calls())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: impl Backend + 'static, params: LlmRequestParams) -> Self {
        Self::from_boxed(Box::new(backend), params)
    }

    pub fn from_boxed(backend: Box<dyn Backend>, params: LlmRequestParams) -> Self {
        Self { backend, params, max_in_flight: 1, calls: AtomicUsize::new(0), sleep: std::thread::sleep }
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn params(&self) -> &LlmRequestParams {
        &self.params
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Backend attempts made so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Sends one prompt, retrying transport failures, 429 and 5xx with exponential backoff.
    pub fn send(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.complete(prompt, &self.params) {
                Ok(c) if c.finish_reason.as_deref() == Some("length") => {
                    return Err(GatewayError::ChunkTooLarge("reply truncated at the token limit".into()));
                }
                Ok(c) => return Ok(c),
                Err(e) if e.is_retryable() && attempt <= self.params.max_retries => {
                    let delay = self.params.backoff_before_retry(attempt - 1);
                    log::warn!("{} attempt {attempt} failed ({e}); retrying in {delay:?}", self.backend.name());
                    (self.sleep)(delay);
                }
                Err(e) => return Err(e.with_attempts(attempt)),
            }
        }
    }

    pub fn send_envelope(&self, envelope: &PromptEnvelope, schema: &RecordSchema) -> Result<LlmResult, GatewayError> {
        self.send(&envelope.render()).map(|c| LlmResult::from_completion(c, schema))
    }

    /// Sends every prompt with at most `max_in_flight` concurrent requests.
    ///
    /// Results are returned in input order whatever the completion order.
    pub fn send_batch(&self, prompts: &[String]) -> Vec<Result<Completion, GatewayError>> {
        if self.max_in_flight == 1 || prompts.len() < 2 {
            return prompts.iter().map(|p| self.send(p)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Completion, GatewayError>>>> =
            prompts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.max_in_flight.min(prompts.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(prompt) = prompts.get(i) else { break };
                    let result = self.send(prompt);
                    *slots[i].lock().expect("slot lock") = Some(result);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every slot filled")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky {
        failures: AtomicUsize,
        error: fn() -> GatewayError,
    }

    impl Backend for Flaky {
        fn complete(&self, prompt: &str, _: &LlmRequestParams) -> Result<Completion, GatewayError> {
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err((self.error)());
            }
            Ok(Completion::text(format!("echo {prompt}")))
        }

        fn name(&self) -> &str {
            "flaky"
        }
    }

    fn gateway(failures: usize, error: fn() -> GatewayError) -> Gateway {
        let mut g = Gateway::new(Flaky { failures: AtomicUsize::new(failures), error }, LlmRequestParams::default());
        g.sleep = |_| {};
        g
    }

    fn transport() -> GatewayError {
        GatewayError::Transport { attempts: 1, message: "refused".into() }
    }

    #[test]
    fn retries_then_succeeds() {
        let g = gateway(2, transport);
        assert_eq!(g.send("x").unwrap().text, "echo x");
        assert_eq!(g.calls(), 3);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let g = gateway(10, transport);
        match g.send("x").unwrap_err() {
            GatewayError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rate_limit_surfaces_after_retries() {
        let g = gateway(10, || GatewayError::RateLimited { attempts: 1 });
        assert!(matches!(g.send("x"), Err(GatewayError::RateLimited { attempts: 3 })));
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let g = gateway(10, || GatewayError::Unauthorized(401));
        assert!(g.send("x").is_err());
        assert_eq!(g.calls(), 1);
    }

    #[test]
    fn backoff_doubles() {
        let p = LlmRequestParams::default();
        assert_eq!(
            (0..3).map(|r| p.backoff_before_retry(r).as_secs()).collect::<Vec<_>>(),
            [1, 2, 4]
        );
    }

    #[test]
    fn batch_keeps_input_order() {
        let g = gateway(0, transport).with_max_in_flight(4);
        let prompts: Vec<String> = (0..20).map(|i| i.to_string()).collect();
        let out: Vec<String> = g.send_batch(&prompts).into_iter().map(|r| r.unwrap().text).collect();
        assert_eq!(out, prompts.iter().map(|p| format!("echo {p}")).collect::<Vec<_>>());
    }

    #[test]
    fn params_default_to_zero_temperature() {
        assert_eq!(LlmRequestParams::default().temperature, 0.0);
        let p: LlmRequestParams = serde_json::from_str(r#"{"model_id": "m", "backoff": 5}"#).unwrap();
        assert_eq!(p.backoff, Duration::from_millis(5));
        assert_eq!(p.max_retries, 2);
    }
}

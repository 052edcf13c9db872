use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::AugmentPrompt;
use crate::error::{Error, Result};

/// Environment variable holding the endpoint's bearer token.
pub const API_KEY_ENV: &str = "LEXMATCHER_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// 401 or 403. Aborts the whole batch.
    Auth(u16),
    Status(u16, String),
    Timeout,
    Network(String),
    /// The endpoint answered but not in the expected shape.
    Protocol(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Status(code, _) => *code == 429 || *code >= 500,
            TransportError::Timeout | TransportError::Network(_) => true,
            TransportError::Auth(_) | TransportError::Protocol(_) => false,
        }
    }
}

impl std::fmt::Display for TransportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransportError::Auth(c) => write!(f, "authentication failed (HTTP {c})"),
            TransportError::Status(c, body) => write!(f, "HTTP {c}: {body}"),
            TransportError::Timeout => write!(f, "request timed out"),
            TransportError::Network(m) => write!(f, "network error: {m}"),
            TransportError::Protocol(m) => write!(f, "unexpected response: {m}"),
        }
    }
}

/// Sends one chat request and returns the assistant message text.
pub trait ChatTransport: Sync {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    #[serde(default = "default_url")]
    pub url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_backoff")]
    pub max_backoff_ms: u64,
}

fn default_url() -> String {
    "https://api.openai.com/v1/chat/completions".into()
}
fn default_model() -> String {
    "gpt-3.5-turbo".into()
}
fn default_attempts() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_timeout() -> u64 {
    60
}
fn default_backoff() -> u64 {
    500
}
fn default_max_backoff() -> u64 {
    8000
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: default_url(),
            model: default_model(),
            temperature: 0.0,
            max_attempts: default_attempts(),
            concurrency: default_concurrency(),
            timeout_secs: default_timeout(),
            initial_backoff_ms: default_backoff(),
            max_backoff_ms: default_max_backoff(),
        }
    }
}

impl EndpointConfig {
    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }

    pub fn request_for(&self, prompt: &str) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: self.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmOutcome {
    Response(String),
    Failed(String),
}

/// Blocking HTTP transport speaking the chat-completions JSON convention.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            url: url.into(),
            api_key,
        }
    }

    /// Reads the key from the environment; errors if it is unset.
    pub fn from_env(cfg: &EndpointConfig) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| Error::Config(format!("online augmentation needs ${API_KEY_ENV} to be set")))?;
        Ok(Self::new(cfg.url.clone(), Some(key), Duration::from_secs(cfg.timeout_secs)))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let mut req = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_string(request).map_err(|e| TransportError::Protocol(e.to_string()))?;
        match req.send_string(&body) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| TransportError::Network(e.to_string()))?;
                let parsed: ChatResponse =
                    serde_json::from_str(&text).map_err(|e| TransportError::Protocol(e.to_string()))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| TransportError::Protocol("no choices in response".into()))
            }
            Err(ureq::Error::Status(code, resp)) if code == 401 || code == 403 => {
                drop(resp);
                Err(TransportError::Auth(code))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(TransportError::Status(code, body.chars().take(200).collect()))
            }
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    Err(TransportError::Timeout)
                } else {
                    Err(TransportError::Network(msg))
                }
            }
        }
    }
}

fn call_one(transport: &dyn ChatTransport, cfg: &EndpointConfig, prompt: &str) -> std::result::Result<String, TransportError> {
    let request = cfg.request_for(prompt);
    let attempts = cfg.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        match transport.complete(&request) {
            Ok(text) => return Ok(text),
            Err(e) if e.retryable() && attempt + 1 < attempts => {
                log::debug!("attempt {} failed: {e}; retrying", attempt + 1);
                std::thread::sleep(cfg.backoff(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Sends every prompt, up to `cfg.concurrency` at a time. Per-prompt
/// failures are recorded in the outcome list; an authentication failure
/// aborts the batch.
pub fn call_llm(prompts: &[AugmentPrompt], transport: &dyn ChatTransport, cfg: &EndpointConfig) -> Result<Vec<LlmOutcome>> {
    let results: Mutex<Vec<Option<LlmOutcome>>> = Mutex::new(vec![None; prompts.len()]);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let auth_status = Mutex::new(None);
    let workers = cfg.concurrency.clamp(1, prompts.len().max(1));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(prompt) = prompts.get(i) else {
                    return;
                };
                let outcome = match call_one(transport, cfg, &prompt.rendered_text) {
                    Ok(text) => LlmOutcome::Response(text),
                    Err(TransportError::Auth(code)) => {
                        abort.store(true, Ordering::SeqCst);
                        *auth_status.lock().unwrap() = Some(code);
                        return;
                    }
                    Err(e) => {
                        log::warn!("prompt {i} ({}) failed: {e}", prompt.sense.sense_id);
                        LlmOutcome::Failed(e.to_string())
                    }
                };
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    if let Some(status) = auth_status.into_inner().unwrap() {
        return Err(Error::Auth { status });
    }
    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.unwrap_or_else(|| LlmOutcome::Failed("not attempted".into())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{Origin, SensePair};
    use std::collections::HashMap;

    fn prompts(n: usize) -> Vec<AugmentPrompt> {
        (0..n)
            .map(|i| AugmentPrompt {
                sense: SensePair {
                    source_segment: vec!["w".into()],
                    target_segment: vec!["t".into()],
                    source_text: "w".into(),
                    target_text: "t".into(),
                    pos: None,
                    sense_id: format!("s{i}"),
                    definition: None,
                    origin: Origin::Dictionary,
                },
                rendered_text: format!("prompt {i}"),
            })
            .collect()
    }

    fn fast() -> EndpointConfig {
        EndpointConfig {
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
            concurrency: 2,
            ..EndpointConfig::default()
        }
    }

    /// Scripted transport: fails `prompt 1` with 500 forever, others echo.
    struct Scripted {
        calls: Mutex<HashMap<String, u32>>,
        auth_fail: bool,
    }

    impl ChatTransport for Scripted {
        fn complete(&self, req: &ChatRequest) -> std::result::Result<String, TransportError> {
            let p = req.messages[0].content.clone();
            *self.calls.lock().unwrap().entry(p.clone()).or_default() += 1;
            if self.auth_fail {
                return Err(TransportError::Auth(401));
            }
            if p == "prompt 1" {
                return Err(TransportError::Status(500, "boom".into()));
            }
            Ok(format!("echo {p}"))
        }
    }

    #[test]
    fn failures_are_retried_then_recorded() {
        let t = Scripted {
            calls: Mutex::new(HashMap::new()),
            auth_fail: false,
        };
        let out = call_llm(&prompts(3), &t, &fast()).unwrap();
        assert_eq!(out[0], LlmOutcome::Response("echo prompt 0".into()));
        assert!(matches!(&out[1], LlmOutcome::Failed(m) if m.contains("500")));
        assert_eq!(out[2], LlmOutcome::Response("echo prompt 2".into()));
        let calls = t.calls.lock().unwrap();
        assert_eq!(calls["prompt 1"], 3);
        assert_eq!(calls["prompt 0"], 1);
    }

    #[test]
    fn auth_failure_aborts() {
        let t = Scripted {
            calls: Mutex::new(HashMap::new()),
            auth_fail: true,
        };
        let err = call_llm(&prompts(5), &t, &fast()).unwrap_err();
        assert!(matches!(err, Error::Auth { status: 401 }));
        assert!(t.calls.lock().unwrap().len() <= 2);
    }

    #[test]
    fn client_errors_are_not_retried() {
        struct BadRequest(Mutex<u32>);
        impl ChatTransport for BadRequest {
            fn complete(&self, _: &ChatRequest) -> std::result::Result<String, TransportError> {
                *self.0.lock().unwrap() += 1;
                Err(TransportError::Status(400, "bad".into()))
            }
        }
        let t = BadRequest(Mutex::new(0));
        let out = call_llm(&prompts(1), &t, &fast()).unwrap();
        assert!(matches!(out[0], LlmOutcome::Failed(_)));
        assert_eq!(*t.0.lock().unwrap(), 1);
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let cfg = EndpointConfig {
            initial_backoff_ms: 100,
            max_backoff_ms: 1000,
            ..EndpointConfig::default()
        };
        assert_eq!(cfg.backoff(0), Duration::from_millis(100));
        assert_eq!(cfg.backoff(1), Duration::from_millis(200));
        assert_eq!(cfg.backoff(2), Duration::from_millis(400));
        assert_eq!(cfg.backoff(5), Duration::from_millis(1000));
    }

    #[test]
    fn request_wire_format() {
        let req = EndpointConfig::default().request_for("hi");
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(v["model"], "gpt-3.5-turbo");
        assert_eq!(v["messages"][0]["role"], "user");
        assert_eq!(v["messages"][0]["content"], "hi");
        assert_eq!(v["temperature"], 0.0);
    }
}

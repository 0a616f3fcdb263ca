//! Provider-agnostic chat-completion client with retries, call logging, and
//! a record/replay cassette that makes every model-dependent test
//! deterministic and offline.

use std::cell::RefCell;
use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::time::Duration;

use base64::Engine as _;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// What a completion is for; selects model/temperature defaults and tags the
/// run log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PurposeTag {
    Agent,
    Analyzer,
    OptimizerGen,
    OptimizerVerify,
}

impl PurposeTag {
    pub fn label(self) -> &'static str {
        match self {
            PurposeTag::Agent => "agent",
            PurposeTag::Analyzer => "analyzer",
            PurposeTag::OptimizerGen => "optimizer_gen",
            PurposeTag::OptimizerVerify => "optimizer_verify",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "agent" => Some(PurposeTag::Agent),
            "analyzer" => Some(PurposeTag::Analyzer),
            "optimizer_gen" => Some(PurposeTag::OptimizerGen),
            "optimizer_verify" => Some(PurposeTag::OptimizerVerify),
            _ => None,
        }
    }
}

/// Default decoding temperature per role: interface generation samples at
/// 0.2, everything else is greedy.
pub fn default_temperature(purpose: PurposeTag) -> f64 {
    match purpose {
        PurposeTag::OptimizerGen => 0.2,
        _ => 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub model_name: String,
    pub temperature: f64,
    pub max_output: u32,
    pub purpose_tag: PurposeTag,
}

impl ChatRequest {
    pub fn new(
        purpose_tag: PurposeTag,
        model_name: impl Into<String>,
        temperature: f64,
        messages: Vec<ChatMessage>,
    ) -> Self {
        debug_assert!(!messages.is_empty());
        debug_assert!(matches!(messages[0].role, Role::System | Role::User));
        ChatRequest {
            messages,
            model_name: model_name.into(),
            temperature,
            max_output: 4096,
            purpose_tag,
        }
    }
}

fn canonicalize_content(content: &str) -> String {
    content
        .lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Stable request fingerprint: sensitive to role order, message content,
/// model name, and temperature; insensitive to trailing whitespace at line
/// ends.
pub fn fingerprint(request: &ChatRequest) -> String {
    let mut hasher = Sha256::new();
    for message in &request.messages {
        hasher.update(message.role.label().as_bytes());
        hasher.update([0x1f]);
        hasher.update(canonicalize_content(&message.content).as_bytes());
        hasher.update([0x1e]);
    }
    hasher.update(request.model_name.as_bytes());
    hasher.update([0x1f]);
    hasher.update(format!("{:?}", request.temperature).as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatewayMode {
    Record,
    Replay,
    Live,
}

/// Recorded responses keyed by request fingerprint. Repeated identical
/// requests consume successive entries in insertion order.
#[derive(Debug, Default)]
pub struct Cassette {
    entries: HashMap<String, VecDeque<(PurposeTag, String)>>,
    insertion_order: Vec<String>,
}

impl Cassette {
    pub fn new() -> Self {
        Cassette::default()
    }

    pub fn record(&mut self, fingerprint: String, purpose: PurposeTag, response: String) {
        self.insertion_order.push(fingerprint.clone());
        self.entries
            .entry(fingerprint)
            .or_default()
            .push_back((purpose, response));
    }

    pub fn consume(&mut self, fingerprint: &str) -> Option<String> {
        self.entries
            .get_mut(fingerprint)
            .and_then(|queue| queue.pop_front())
            .map(|(_, text)| text)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One record per line: `fingerprint<TAB>purpose<TAB>base64(response)`.
    pub fn render(&self) -> String {
        let mut remaining: HashMap<&str, usize> = HashMap::new();
        let mut out = String::new();
        for fp in &self.insertion_order {
            let offset = remaining.entry(fp.as_str()).or_insert(0);
            if let Some(queue) = self.entries.get(fp.as_str()) {
                if let Some((purpose, text)) = queue.get(*offset) {
                    let encoded =
                        base64::engine::general_purpose::STANDARD.encode(text.as_bytes());
                    out.push_str(&format!("{fp}\t{}\t{encoded}\n", purpose.label()));
                }
            }
            *offset += 1;
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut cassette = Cassette::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(GatewayError::Config(format!(
                    "cassette line {}: expected 3 tab-separated fields",
                    lineno + 1
                )));
            }
            let purpose = PurposeTag::from_label(fields[1]).ok_or_else(|| {
                GatewayError::Config(format!(
                    "cassette line {}: unknown purpose {}",
                    lineno + 1,
                    fields[1]
                ))
            })?;
            let decoded = base64::engine::general_purpose::STANDARD
                .decode(fields[2])
                .map_err(|e| {
                    GatewayError::Config(format!("cassette line {}: bad base64: {e}", lineno + 1))
                })?;
            let text = String::from_utf8(decoded).map_err(|e| {
                GatewayError::Config(format!("cassette line {}: not utf-8: {e}", lineno + 1))
            })?;
            cassette.record(fields[0].to_string(), purpose, text);
        }
        Ok(cassette)
    }

    pub fn save_to(&self, path: &Path) -> Result<(), GatewayError> {
        fs::write(path, self.render())
            .map_err(|e| GatewayError::Config(format!("writing cassette {path:?}: {e}")))
    }

    pub fn load_from(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("reading cassette {path:?}: {e}")))?;
        Cassette::parse(&text)
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cassette miss for purpose {purpose}: no recorded response for fingerprint {fingerprint}")]
    CassetteMiss { purpose: String, fingerprint: String },
    #[error("transport failed after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("gateway configuration error: {0}")]
    Config(String),
}

/// Transport-level failure; `transient` failures are retried.
#[derive(Debug, Clone, Error)]
#[error("{detail}")]
pub struct TransportError {
    pub transient: bool,
    pub detail: String,
}

pub trait ChatTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Deterministic transport: hands out pre-scripted responses per purpose in
/// order. Used to build cassettes offline and as the fake LLM in tests.
#[derive(Default)]
pub struct ScriptedTransport {
    queues: RefCell<HashMap<PurposeTag, VecDeque<String>>>,
}

impl ScriptedTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, purpose: PurposeTag, response: impl Into<String>) {
        self.queues
            .borrow_mut()
            .entry(purpose)
            .or_default()
            .push_back(response.into());
    }

    pub fn remaining(&self, purpose: PurposeTag) -> usize {
        self.queues
            .borrow()
            .get(&purpose)
            .map(VecDeque::len)
            .unwrap_or(0)
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.queues
            .borrow_mut()
            .get_mut(&request.purpose_tag)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| TransportError {
                transient: false,
                detail: format!(
                    "scripted transport exhausted for purpose {}",
                    request.purpose_tag.label()
                ),
            })
    }
}

/// HTTP chat-completion transport (OpenAI-style wire shape).
pub struct HttpTransport {
    base_url: String,
    api_key: String,
    path: String,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn from_env() -> Result<Self, GatewayError> {
        let base_url = std::env::var("ALIGN_LLM_BASE_URL").map_err(|_| {
            GatewayError::Config("ALIGN_LLM_BASE_URL is not set (required for live mode)".into())
        })?;
        let api_key = std::env::var("ALIGN_LLM_API_KEY").map_err(|_| {
            GatewayError::Config("ALIGN_LLM_API_KEY is not set (required for live mode)".into())
        })?;
        let path = std::env::var("ALIGN_LLM_PATH")
            .unwrap_or_else(|_| "/v1/chat/completions".to_string());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Config(format!("building http client: {e}")))?;
        Ok(HttpTransport { base_url, api_key, path, client })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                serde_json::json!({
                    "role": m.role.label(),
                    "content": m.content,
                })
            })
            .collect();
        let body = serde_json::json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        });
        let url = format!("{}{}", self.base_url.trim_end_matches('/'), self.path);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| TransportError {
                transient: e.is_timeout() || e.is_connect(),
                detail: format!("request error: {e}"),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError {
                transient: status.as_u16() == 429 || status.is_server_error(),
                detail: format!("http status {status}"),
            });
        }
        let value: serde_json::Value = response.json().map_err(|e| TransportError {
            transient: false,
            detail: format!("decoding response: {e}"),
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError {
                transient: false,
                detail: "response lacks choices[0].message.content".to_string(),
            })
    }
}

/// One line of the run log: every completion appears exactly once.
#[derive(Debug, Clone)]
pub struct CallLogEntry {
    pub purpose: PurposeTag,
    pub fingerprint: String,
    pub attempts: u32,
    pub response_chars: usize,
}

/// Per-role model names with a shared default.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub default_model: String,
    pub role_models: HashMap<PurposeTag, String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            default_model: "offline-model".to_string(),
            role_models: HashMap::new(),
        }
    }
}

impl ModelConfig {
    /// Reads ALIGN_LLM_MODEL and ALIGN_LLM_MODEL_<ROLE> overrides.
    pub fn from_env() -> Self {
        let mut config = ModelConfig::default();
        if let Ok(model) = std::env::var("ALIGN_LLM_MODEL") {
            config.default_model = model;
        }
        for (purpose, suffix) in [
            (PurposeTag::Agent, "AGENT"),
            (PurposeTag::Analyzer, "ANALYZER"),
            (PurposeTag::OptimizerGen, "OPTIMIZER_GEN"),
            (PurposeTag::OptimizerVerify, "OPTIMIZER_VERIFY"),
        ] {
            if let Ok(model) = std::env::var(format!("ALIGN_LLM_MODEL_{suffix}")) {
                config.role_models.insert(purpose, model);
            }
        }
        config
    }

    pub fn model_for(&self, purpose: PurposeTag) -> &str {
        self.role_models
            .get(&purpose)
            .map(String::as_str)
            .unwrap_or(&self.default_model)
    }
}

const MAX_ATTEMPTS: u32 = 3;

/// The gateway every model call flows through.
pub struct Gateway {
    mode: GatewayMode,
    transport: Option<Box<dyn ChatTransport>>,
    cassette: RefCell<Cassette>,
    log: RefCell<Vec<CallLogEntry>>,
    models: ModelConfig,
    backoff_base: Duration,
}

impl Gateway {
    pub fn replay(cassette: Cassette) -> Self {
        Gateway {
            mode: GatewayMode::Replay,
            transport: None,
            cassette: RefCell::new(cassette),
            log: RefCell::new(Vec::new()),
            models: ModelConfig::default(),
            backoff_base: Duration::from_millis(500),
        }
    }

    pub fn record(transport: Box<dyn ChatTransport>) -> Self {
        Gateway {
            mode: GatewayMode::Record,
            transport: Some(transport),
            cassette: RefCell::new(Cassette::new()),
            log: RefCell::new(Vec::new()),
            models: ModelConfig::default(),
            backoff_base: Duration::from_millis(500),
        }
    }

    pub fn live(transport: Box<dyn ChatTransport>) -> Self {
        Gateway {
            mode: GatewayMode::Live,
            transport: Some(transport),
            cassette: RefCell::new(Cassette::new()),
            log: RefCell::new(Vec::new()),
            models: ModelConfig::default(),
            backoff_base: Duration::from_millis(500),
        }
    }

    pub fn with_models(mut self, models: ModelConfig) -> Self {
        self.models = models;
        self
    }

    /// Shrinks retry backoff; intended for tests with fake transports.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn model_for(&self, purpose: PurposeTag) -> String {
        self.models.model_for(purpose).to_string()
    }

    /// Sends one completion request and returns the assistant text.
    pub fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let fp = fingerprint(request);
        let (text, attempts) = match self.mode {
            GatewayMode::Replay => {
                let text = self.cassette.borrow_mut().consume(&fp).ok_or_else(|| {
                    GatewayError::CassetteMiss {
                        purpose: request.purpose_tag.label().to_string(),
                        fingerprint: fp.clone(),
                    }
                })?;
                (text, 1)
            }
            GatewayMode::Record | GatewayMode::Live => {
                let transport = self.transport.as_ref().ok_or_else(|| {
                    GatewayError::Config("no transport configured for live/record mode".into())
                })?;
                let (text, attempts) = self.send_with_retries(transport.as_ref(), request)?;
                if self.mode == GatewayMode::Record {
                    self.cassette.borrow_mut().record(
                        fp.clone(),
                        request.purpose_tag,
                        text.clone(),
                    );
                }
                (text, attempts)
            }
        };
        self.log.borrow_mut().push(CallLogEntry {
            purpose: request.purpose_tag,
            fingerprint: fp,
            attempts,
            response_chars: text.chars().count(),
        });
        Ok(text)
    }

    fn send_with_retries(
        &self,
        transport: &dyn ChatTransport,
        request: &ChatRequest,
    ) -> Result<(String, u32), GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match transport.send(request) {
                Ok(text) => return Ok((text, attempt)),
                Err(err) if err.transient && attempt < MAX_ATTEMPTS => {
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
                }
                Err(err) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        detail: err.detail,
                    })
                }
            }
        }
    }

    pub fn call_log(&self) -> Vec<CallLogEntry> {
        self.log.borrow().clone()
    }

    /// Serializes the accumulated cassette (record mode).
    pub fn cassette_text(&self) -> String {
        self.cassette.borrow().render()
    }

    pub fn save_cassette(&self, path: &Path) -> Result<(), GatewayError> {
        self.cassette.borrow().save_to(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(content: &str, temperature: f64) -> ChatRequest {
        ChatRequest::new(
            PurposeTag::Agent,
            "offline-model",
            temperature,
            vec![ChatMessage::system("sys"), ChatMessage::user(content)],
        )
    }

    #[test]
    fn fingerprint_is_stable_and_field_sensitive() {
        let a = fingerprint(&request("hello", 0.0));
        let b = fingerprint(&request("hello", 0.0));
        assert_eq!(a, b);
        assert_ne!(a, fingerprint(&request("hello", 0.2)));
        assert_ne!(a, fingerprint(&request("other", 0.0)));
        let mut different_model = request("hello", 0.0);
        different_model.model_name = "another".into();
        assert_ne!(a, fingerprint(&different_model));
    }

    #[test]
    fn fingerprint_ignores_trailing_line_whitespace() {
        let a = fingerprint(&request("line one  \nline two\t", 0.0));
        let b = fingerprint(&request("line one\nline two", 0.0));
        assert_eq!(a, b);
        // Leading whitespace is significant.
        assert_ne!(a, fingerprint(&request("  line one\nline two", 0.0)));
    }

    #[test]
    fn fingerprint_is_sensitive_to_role_order() {
        let a = ChatRequest::new(
            PurposeTag::Agent,
            "m",
            0.0,
            vec![ChatMessage::system("x"), ChatMessage::user("y")],
        );
        let b = ChatRequest::new(
            PurposeTag::Agent,
            "m",
            0.0,
            vec![ChatMessage::user("x"), ChatMessage::system("y")],
        );
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn replay_returns_recorded_text_and_misses_name_the_purpose() {
        let req = request("hello", 0.0);
        let mut cassette = Cassette::new();
        cassette.record(fingerprint(&req), PurposeTag::Agent, "recorded reply".into());
        let gateway = Gateway::replay(cassette);
        assert_eq!(gateway.complete(&req).unwrap(), "recorded reply");
        let err = gateway.complete(&req).unwrap_err();
        match err {
            GatewayError::CassetteMiss { purpose, .. } => assert_eq!(purpose, "agent"),
            other => panic!("expected CassetteMiss, got {other:?}"),
        }
    }

    #[test]
    fn repeated_identical_requests_consume_successive_entries() {
        let req = request("same", 0.0);
        let mut cassette = Cassette::new();
        cassette.record(fingerprint(&req), PurposeTag::Agent, "first".into());
        cassette.record(fingerprint(&req), PurposeTag::Agent, "second".into());
        let gateway = Gateway::replay(cassette);
        assert_eq!(gateway.complete(&req).unwrap(), "first");
        assert_eq!(gateway.complete(&req).unwrap(), "second");
        assert_eq!(gateway.call_log().len(), 2);
    }

    #[test]
    fn cassette_file_round_trips_multiline_responses() {
        let mut cassette = Cassette::new();
        cassette.record(
            "abcd".into(),
            PurposeTag::Analyzer,
            "line one\nline two\twith tab".into(),
        );
        cassette.record("abcd".into(), PurposeTag::Analyzer, "second entry".into());
        let text = cassette.render();
        assert_eq!(text.lines().count(), 2);
        let mut parsed = Cassette::parse(&text).unwrap();
        assert_eq!(parsed.consume("abcd").unwrap(), "line one\nline two\twith tab");
        assert_eq!(parsed.consume("abcd").unwrap(), "second entry");
        assert!(parsed.consume("abcd").is_none());
    }

    struct FlakyTransport {
        responses: RefCell<VecDeque<Result<String, TransportError>>>,
    }

    impl ChatTransport for FlakyTransport {
        fn send(&self, _request: &ChatRequest) -> Result<String, TransportError> {
            self.responses
                .borrow_mut()
                .pop_front()
                .unwrap_or_else(|| Err(TransportError {
                    transient: false,
                    detail: "exhausted".into(),
                }))
        }
    }

    #[test]
    fn transient_failures_retry_then_succeed() {
        let transport = FlakyTransport {
            responses: RefCell::new(VecDeque::from([
                Err(TransportError { transient: true, detail: "rate limited".into() }),
                Ok("finally".to_string()),
            ])),
        };
        let gateway = Gateway::live(Box::new(transport)).with_backoff(Duration::from_millis(1));
        let req = request("x", 0.0);
        assert_eq!(gateway.complete(&req).unwrap(), "finally");
        assert_eq!(gateway.call_log()[0].attempts, 2);
    }

    #[test]
    fn fatal_failures_do_not_retry() {
        let transport = FlakyTransport {
            responses: RefCell::new(VecDeque::from([
                Err(TransportError { transient: false, detail: "bad request".into() }),
                Ok("unreachable".to_string()),
            ])),
        };
        let gateway = Gateway::live(Box::new(transport)).with_backoff(Duration::from_millis(1));
        let err = gateway.complete(&request("x", 0.0)).unwrap_err();
        match err {
            GatewayError::Transport { attempts, .. } => assert_eq!(attempts, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transient_failures_exhaust_after_three_attempts() {
        let transport = FlakyTransport {
            responses: RefCell::new(VecDeque::from([
                Err(TransportError { transient: true, detail: "t1".into() }),
                Err(TransportError { transient: true, detail: "t2".into() }),
                Err(TransportError { transient: true, detail: "t3".into() }),
                Ok("unreachable".to_string()),
            ])),
        };
        let gateway = Gateway::live(Box::new(transport)).with_backoff(Duration::from_millis(1));
        let err = gateway.complete(&request("x", 0.0)).unwrap_err();
        match err {
            GatewayError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn record_mode_accumulates_a_replayable_cassette() {
        let scripted = ScriptedTransport::new();
        scripted.push(PurposeTag::Agent, "take mug 1 from shelf 1");
        let gateway = Gateway::record(Box::new(scripted));
        let req = request("what next?", 0.0);
        assert_eq!(gateway.complete(&req).unwrap(), "take mug 1 from shelf 1");
        let cassette = Cassette::parse(&gateway.cassette_text()).unwrap();
        let replay = Gateway::replay(cassette);
        assert_eq!(replay.complete(&req).unwrap(), "take mug 1 from shelf 1");
    }

    #[test]
    fn default_temperatures_match_role_settings() {
        assert_eq!(default_temperature(PurposeTag::OptimizerGen), 0.2);
        assert_eq!(default_temperature(PurposeTag::Agent), 0.0);
        assert_eq!(default_temperature(PurposeTag::Analyzer), 0.0);
    }
}

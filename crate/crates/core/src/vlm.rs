//! Chat-completion client used for region grounding: a live HTTP client for
//! OpenAI-compatible endpoints, a scripted mock, and a record/replay cache
//! keyed by a digest of the request.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum VlmError {
    #[error("environment variable {var} holding the API key is not set")]
    MissingApiKey { var: String },
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint answered HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no cached transcript for request {hash}")]
    CacheMiss { hash: String },
    #[error("transcript cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error("invalid VLM config: {0}")]
    InvalidConfig(String),
    #[error("mock client has no scripted reply left")]
    MockExhausted,
}

impl VlmError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MissingApiKey { .. } => "MissingApiKey",
            Self::Transport { .. } => "Transport",
            Self::HttpStatus { .. } => "HttpStatus",
            Self::MalformedResponse(_) => "MalformedResponse",
            Self::CacheMiss { .. } => "CacheMiss",
            Self::Cache { .. } => "CacheIo",
            Self::InvalidConfig(_) => "InvalidVlmConfig",
            Self::MockExhausted => "MockExhausted",
        }
    }
}

type VResult<T> = std::result::Result<T, VlmError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub text: String,
    /// The request image is sent as a second content part of this message.
    #[serde(default)]
    pub attach_image: bool,
}

impl ChatMessage {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            text: text.into(),
            attach_image: false,
        }
    }

    pub fn with_image(mut self) -> Self {
        self.attach_image = true;
        self
    }
}

fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn default_model() -> String {
    "gpt-4o".into()
}
fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlmConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    /// First retry delay; each later retry doubles it.
    #[serde(default = "default_backoff")]
    pub backoff_base_secs: f64,
}

impl Default for VlmConfig {
    fn default() -> Self {
        Self {
            base_url: default_base_url(),
            model: default_model(),
            api_key_env: default_key_env(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            temperature: 0.0,
            backoff_base_secs: default_backoff(),
        }
    }
}

impl VlmConfig {
    pub fn validate(&self) -> VResult<()> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(VlmError::InvalidConfig("timeout_secs must be positive".into()));
        }
        if !(self.backoff_base_secs >= 0.0 && self.backoff_base_secs.is_finite()) {
            return Err(VlmError::InvalidConfig("backoff_base_secs must be non-negative".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(VlmError::InvalidConfig("temperature must be non-negative".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(VlmError::InvalidConfig("base_url is empty".into()));
        }
        Ok(())
    }

    /// Delay before retry `k` (1-based).
    pub fn backoff(&self, k: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_secs * 2f64.powi(k.saturating_sub(1).min(30) as i32))
    }
}

pub trait VlmClient {
    /// Sends `messages` with `image_png` attached to every message flagged
    /// `attach_image` and returns the assistant text.
    fn complete(&mut self, messages: &[ChatMessage], image_png: &[u8]) -> VResult<String>;
}

/// Hex SHA-256 over the JSON-serialized messages, a newline, and the image
/// bytes.
pub fn request_hash(messages: &[ChatMessage], image_png: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(messages).expect("messages serialize"));
    h.update(b"\n");
    h.update(image_png);
    hex::encode(h.finalize())
}

pub fn request_body(config: &VlmConfig, messages: &[ChatMessage], image_png: &[u8]) -> Value {
    let url = format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(image_png)
    );
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| {
            let mut content = vec![json!({"type": "text", "text": m.text})];
            if m.attach_image {
                content.push(json!({"type": "image_url", "image_url": {"url": url}}));
            }
            json!({"role": m.role, "content": content})
        })
        .collect();
    json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": messages,
    })
}

pub fn parse_response(body: &str) -> VResult<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| VlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| VlmError::MalformedResponse("missing choices[0].message.content".into()))
}

#[derive(Clone, Debug)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// One HTTP POST; `Err` means no response was received.
pub trait HttpTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &[u8], timeout: Duration) -> Result<HttpResponse, String>;
}

#[derive(Default)]
pub struct UreqTransport;

impl HttpTransport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &[u8], timeout: Duration) -> Result<HttpResponse, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

fn retryable_status(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

pub struct LiveClient {
    config: VlmConfig,
    transport: Box<dyn HttpTransport + Send>,
    sleep: fn(Duration),
    attempts: u32,
}

impl LiveClient {
    pub fn new(config: VlmConfig) -> VResult<Self> {
        Self::with_transport(config, Box::new(UreqTransport))
    }

    pub fn with_transport(config: VlmConfig, transport: Box<dyn HttpTransport + Send>) -> VResult<Self> {
        config.validate()?;
        Ok(Self {
            config,
            transport,
            sleep: std::thread::sleep,
            attempts: 0,
        })
    }

    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    /// HTTP attempts made by the most recent call.
    pub fn last_attempts(&self) -> u32 {
        self.attempts
    }
}

impl VlmClient for LiveClient {
    fn complete(&mut self, messages: &[ChatMessage], image_png: &[u8]) -> VResult<String> {
        if messages.is_empty() {
            return Err(VlmError::InvalidConfig("no messages to send".into()));
        }
        let key = std::env::var(&self.config.api_key_env).map_err(|_| VlmError::MissingApiKey {
            var: self.config.api_key_env.clone(),
        })?;
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = serde_json::to_vec(&request_body(&self.config, messages, image_png)).expect("body serializes");
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        self.attempts = 0;
        loop {
            self.attempts += 1;
            let failure = match self.transport.post_json(&url, Some(&key), &body, timeout) {
                Ok(r) if (200..300).contains(&r.status) => return parse_response(&r.body),
                Ok(r) if !retryable_status(r.status) => {
                    return Err(VlmError::HttpStatus {
                        status: r.status,
                        body: r.body,
                    })
                }
                Ok(r) => VlmError::HttpStatus {
                    status: r.status,
                    body: r.body,
                },
                Err(message) => VlmError::Transport {
                    attempts: self.attempts,
                    message,
                },
            };
            if self.attempts > self.config.max_retries {
                return Err(failure);
            }
            (self.sleep)(self.config.backoff(self.attempts));
        }
    }
}

/// Returns scripted replies in order; the last one repeats when `repeat_last`
/// is set.
#[derive(Clone, Debug, Default)]
pub struct MockClient {
    replies: VecDeque<String>,
    repeat_last: bool,
    pub calls: Vec<Vec<ChatMessage>>,
}

impl MockClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: replies.into_iter().map(Into::into).collect(),
            repeat_last: false,
            calls: Vec::new(),
        }
    }

    pub fn always(reply: impl Into<String>) -> Self {
        Self {
            repeat_last: true,
            ..Self::new([reply])
        }
    }
}

impl VlmClient for MockClient {
    fn complete(&mut self, messages: &[ChatMessage], _image_png: &[u8]) -> VResult<String> {
        self.calls.push(messages.to_vec());
        match (self.replies.len(), self.repeat_last) {
            (0, _) => Err(VlmError::MockExhausted),
            (1, true) => Ok(self.replies[0].clone()),
            _ => Ok(self.replies.pop_front().expect("non-empty")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub request_hash: String,
    pub response_text: String,
    /// Seconds since the Unix epoch at recording time.
    pub timestamp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    Record,
    Replay,
}

/// One `<request_hash>.json` file per transcript.
#[derive(Clone, Debug)]
pub struct TranscriptCache {
    dir: PathBuf,
}

impl TranscriptCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, hash: &str) -> VResult<Option<Transcript>> {
        let path = self.entry_path(hash);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(VlmError::Cache {
                    path,
                    reason: e.to_string(),
                })
            }
        };
        let t: Transcript = serde_json::from_slice(&bytes).map_err(|e| VlmError::Cache {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        if t.request_hash != hash {
            return Err(VlmError::Cache {
                path,
                reason: format!("entry is for request {}", t.request_hash),
            });
        }
        Ok(Some(t))
    }

    /// Writes through a temporary file and a rename so concurrent recorders
    /// never expose a partial entry.
    pub fn store(&self, t: &Transcript) -> VResult<()> {
        let io = |path: &Path, e: std::io::Error| VlmError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        let path = self.entry_path(&t.request_hash);
        let tmp = self.dir.join(format!(".{}.{}.tmp", t.request_hash, std::process::id()));
        let mut bytes = serde_json::to_vec_pretty(t).expect("transcript serializes");
        bytes.push(b'\n');
        fs::write(&tmp, bytes).map_err(|e| io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io(&path, e))
    }
}

/// Record mode forwards to `inner` and stores each answer; replay mode only
/// reads the cache.
pub struct CachedClient {
    cache: TranscriptCache,
    mode: CacheMode,
    inner: Option<Box<dyn VlmClient + Send>>,
}

impl CachedClient {
    pub fn replay(cache: TranscriptCache) -> Self {
        Self {
            cache,
            mode: CacheMode::Replay,
            inner: None,
        }
    }

    pub fn record(cache: TranscriptCache, inner: Box<dyn VlmClient + Send>) -> Self {
        Self {
            cache,
            mode: CacheMode::Record,
            inner: Some(inner),
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }
}

impl VlmClient for CachedClient {
    fn complete(&mut self, messages: &[ChatMessage], image_png: &[u8]) -> VResult<String> {
        let hash = request_hash(messages, image_png);
        match (self.mode, self.inner.as_mut()) {
            (CacheMode::Replay, _) | (CacheMode::Record, None) => match self.cache.load(&hash)? {
                Some(t) => Ok(t.response_text),
                None => Err(VlmError::CacheMiss { hash }),
            },
            (CacheMode::Record, Some(inner)) => {
                let response_text = inner.complete(messages, image_png)?;
                let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                self.cache.store(&Transcript {
                    request_hash: hash,
                    response_text: response_text.clone(),
                    timestamp,
                })?;
                Ok(response_text)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Scripted(Mutex<VecDeque<Result<HttpResponse, String>>>);

    impl HttpTransport for Scripted {
        fn post_json(&self, _: &str, bearer: Option<&str>, _: &[u8], _: Duration) -> Result<HttpResponse, String> {
            assert_eq!(bearer, Some("k"));
            self.0.lock().unwrap().pop_front().expect("scripted response")
        }
    }

    fn ok(text: &str) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
        })
    }

    fn status(s: u16) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: s,
            body: "busy".into(),
        })
    }

    fn client(var: &str, script: Vec<Result<HttpResponse, String>>) -> LiveClient {
        std::env::set_var(var, "k");
        let cfg = VlmConfig {
            api_key_env: var.into(),
            max_retries: 3,
            ..VlmConfig::default()
        };
        LiveClient::with_transport(cfg, Box::new(Scripted(Mutex::new(script.into()))))
            .unwrap()
            .with_sleep(|_| {})
    }

    fn msgs() -> Vec<ChatMessage> {
        vec![ChatMessage::user("a"), ChatMessage::user("b").with_image()]
    }

    #[test]
    fn two_429_then_success() {
        let mut c = client("HANDOVER_TEST_KEY_A", vec![status(429), status(429), ok("human:[1], robot:[2]")]);
        assert_eq!(c.complete(&msgs(), b"png").unwrap(), "human:[1], robot:[2]");
        assert_eq!(c.last_attempts(), 3);
    }

    #[test]
    fn retries_exhausted_and_fatal_status() {
        let mut c = client("HANDOVER_TEST_KEY_B", vec![Err("reset".into()); 4]);
        assert!(matches!(c.complete(&msgs(), b""), Err(VlmError::Transport { attempts: 4, .. })));
        let mut c = client("HANDOVER_TEST_KEY_C", vec![status(401)]);
        assert!(matches!(c.complete(&msgs(), b""), Err(VlmError::HttpStatus { status: 401, .. })));
        assert_eq!(c.last_attempts(), 1);
    }

    #[test]
    fn missing_key() {
        let cfg = VlmConfig {
            api_key_env: "HANDOVER_TEST_KEY_UNSET_42".into(),
            ..VlmConfig::default()
        };
        let mut c = LiveClient::new(cfg).unwrap();
        assert!(matches!(c.complete(&msgs(), b""), Err(VlmError::MissingApiKey { .. })));
    }

    #[test]
    fn backoff_doubles() {
        let cfg = VlmConfig::default();
        assert_eq!(cfg.backoff(1), Duration::from_secs(1));
        assert_eq!(cfg.backoff(2), Duration::from_secs(2));
        assert_eq!(cfg.backoff(3), Duration::from_secs(4));
    }

    #[test]
    fn body_shape() {
        let b = request_body(&VlmConfig::default(), &msgs(), &[1, 2, 3]);
        assert_eq!(b["temperature"], 0.0);
        assert_eq!(b["messages"][0]["content"].as_array().unwrap().len(), 1);
        assert_eq!(b["messages"][1]["content"][0]["type"], "text");
        assert_eq!(b["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(parse_response("{}"), Err(VlmError::MalformedResponse(_))));
        assert!(matches!(parse_response("not json"), Err(VlmError::MalformedResponse(_))));
        assert!(matches!(
            parse_response(r#"{"choices":[{"message":{"content":5}}]}"#),
            Err(VlmError::MalformedResponse(_))
        ));
    }

    #[test]
    fn hash_is_deterministic_and_sensitive() {
        let h = request_hash(&msgs(), b"x");
        assert_eq!(h, request_hash(&msgs(), b"x"));
        assert_ne!(h, request_hash(&msgs(), b"y"));
        assert_ne!(h, request_hash(&msgs()[..1], b"x"));
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranscriptCache::new(dir.path());
        let mut rec = CachedClient::record(cache.clone(), Box::new(MockClient::new(["one", "two"])));
        assert_eq!(rec.complete(&msgs(), b"1").unwrap(), "one");
        assert_eq!(rec.complete(&msgs(), b"2").unwrap(), "two");
        let mut rep = CachedClient::replay(cache);
        assert_eq!(rep.complete(&msgs(), b"2").unwrap(), "two");
        assert_eq!(rep.complete(&msgs(), b"1").unwrap(), "one");
        assert!(matches!(rep.complete(&msgs(), b"3"), Err(VlmError::CacheMiss { .. })));
    }

    #[test]
    fn replay_with_empty_cache() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = CachedClient::replay(TranscriptCache::new(dir.path().join("none")));
        let e = rep.complete(&msgs(), b"").unwrap_err();
        assert_eq!(e.name(), "CacheMiss");
        assert!(e.to_string().contains(&request_hash(&msgs(), b"")));
    }

    #[test]
    fn mock_script() {
        let mut m = MockClient::new(["a"]);
        assert_eq!(m.complete(&msgs(), b"").unwrap(), "a");
        assert!(matches!(m.complete(&msgs(), b""), Err(VlmError::MockExhausted)));
        let mut m = MockClient::always("z");
        assert_eq!(m.complete(&msgs(), b"").unwrap(), "z");
        assert_eq!(m.complete(&msgs(), b"").unwrap(), "z");
    }
}

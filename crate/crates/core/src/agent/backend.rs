use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Message;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub n: usize,
    pub temperature: f64,
    /// Per-request sampling seed drawn from the search's generator.
    pub seed: u64,
}

impl CompletionRequest {
    /// Stable digest used to key recorded transcripts.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("script: {0}")]
    Script(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that turns a chat prompt into `n` completions.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        (**self).complete(req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    /// Whether the server honours `n > 1` in a single call.
    pub supports_n: bool,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "agent".into(),
            api_key_env: None,
            timeout_secs: 60,
            supports_n: true,
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// Chat-completions client over blocking HTTP.
pub struct EndpointBackend {
    config: EndpointConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    n: usize,
    temperature: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

impl EndpointBackend {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::Transport(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    fn call_once(&self, req: &CompletionRequest, n: usize, seed: u64) -> Result<Vec<String>, BackendError> {
        let url = format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = WireRequest { model: &self.config.model, messages: &req.messages, n, temperature: req.temperature, seed };
        let mut builder = self.client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: text });
        }
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        Ok(parsed.choices.into_iter().map(|c| c.message.content.unwrap_or_default()).collect())
    }

    fn call_with_retry(&self, req: &CompletionRequest, n: usize, seed: u64) -> Result<Vec<String>, BackendError> {
        let attempts = self.config.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match self.call_once(req, n, seed) {
                Ok(v) => return Ok(v),
                // Client errors other than rate limiting will not improve on retry.
                Err(BackendError::Status { status, body }) if (400..500).contains(&status) && status != 429 => {
                    return Err(BackendError::Status { status, body })
                }
                Err(e) => {
                    log::warn!("endpoint attempt {}/{attempts} failed: {e}", attempt + 1);
                    last = Some(e);
                    if attempt + 1 < attempts {
                        std::thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
                    }
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

impl ChatBackend for EndpointBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        if self.config.supports_n || req.n == 1 {
            return self.call_with_retry(req, req.n, req.seed);
        }
        let mut out = Vec::with_capacity(req.n);
        for i in 0..req.n {
            let mut one = self.call_with_retry(req, 1, req.seed.wrapping_add(i as u64))?;
            out.append(&mut one);
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Transcript {
    digest: String,
    completions: Vec<String>,
}

/// Wraps a backend and appends every exchange to a JSON-lines transcript.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let out = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { inner, out: Mutex::new(out) })
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let completions = self.inner.complete(req)?;
        let line = serde_json::to_string(&Transcript { digest: req.digest(), completions: completions.clone() })
            .expect("transcript serializes");
        let mut f = self.out.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(f, "{line}")?;
        Ok(completions)
    }
}

/// Serves completions from a recorded transcript, keyed by request digest.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, Vec<String>>,
}

impl ReplayBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let mut responses = HashMap::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Transcript =
                serde_json::from_str(&line).map_err(|e| BackendError::Malformed(format!("line {}: {e}", i + 1)))?;
            responses.insert(t.digest, t.completions);
        }
        Ok(Self { responses })
    }

    pub fn insert(&mut self, req: &CompletionRequest, completions: Vec<String>) {
        self.responses.insert(req.digest(), completions);
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<Vec<String>, BackendError> {
        let digest = req.digest();
        self.responses.get(&digest).cloned().ok_or(BackendError::ReplayMiss(digest))
    }
}

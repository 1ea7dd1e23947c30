//! Client for an external text-to-text generation service.
//!
//! Requests fan out with a bounded number in flight, transient failures are
//! retried with exponential backoff, and every successful generation is
//! stored in an append-only on-disk cache keyed by the SHA-256 of the model
//! name, prompt and decode parameters.
//!
//! Wire contract: `POST <endpoint>` with
//! `{"model", "prompt", "max_tokens", "temperature", "stop"}`, answered by
//! `{"text": "..."}`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::taskgen::PromptInstance;

/// Environment variable holding the bearer token for the endpoint.
pub const TOKEN_ENV: &str = "UNIEX_API_TOKEN";

/// The model input: instruction, options, then the text.
pub fn render_full_prompt(p: &PromptInstance) -> String {
    format!("{}\n{}\nText: {}", p.instruction, p.options, p.text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { max_tokens: 512, temperature: 0.0, stop: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub id: String,
    pub prompt: String,
    #[serde(flatten)]
    pub params: DecodeParams,
}

impl GenerationRequest {
    pub fn new(id: impl Into<String>, prompt: impl Into<String>, params: DecodeParams) -> Self {
        Self { id: id.into(), prompt: prompt.into(), params }
    }

    pub fn from_prompt(p: &PromptInstance, params: DecodeParams) -> Self {
        Self::new(p.id.clone(), render_full_prompt(p), params)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.prompt.is_empty() {
            return Err("empty prompt".into());
        }
        if self.params.max_tokens == 0 {
            return Err("max_tokens must be at least 1".into());
        }
        if !(self.params.temperature >= 0.0 && self.params.temperature.is_finite()) {
            return Err(format!("invalid temperature {}", self.params.temperature));
        }
        Ok(())
    }
}

/// Body sent to the endpoint. Also the cache key preimage.
#[derive(Debug, Serialize)]
pub struct WireRequest<'a> {
    pub model: &'a str,
    pub prompt: &'a str,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: &'a [String],
}

impl<'a> WireRequest<'a> {
    pub fn new(model: &'a str, request: &'a GenerationRequest) -> Self {
        Self {
            model,
            prompt: &request.prompt,
            max_tokens: request.params.max_tokens,
            temperature: request.params.temperature,
            stop: &request.params.stop,
        }
    }
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    text: String,
}

pub fn cache_key(model: &str, request: &GenerationRequest) -> String {
    let body = serde_json::to_vec(&WireRequest::new(model, request)).expect("request serializes");
    hex::encode(Sha256::digest(&body))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndpointError {
    /// Worth retrying: timeouts, connection failures, 5xx, 429.
    Transient(String),
    /// Retrying will not help: 4xx, malformed responses.
    Permanent(String),
}

impl std::fmt::Display for EndpointError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EndpointError::Transient(m) | EndpointError::Permanent(m) => f.write_str(m),
        }
    }
}

#[async_trait]
pub trait TextGenerator: Send + Sync {
    async fn generate(&self, model: &str, request: &GenerationRequest) -> std::result::Result<String, EndpointError>;
}

/// JSON-over-HTTP endpoint.
#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    client: reqwest::Client,
    url: String,
    token: Option<String>,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Inference(e.to_string()))?;
        Ok(Self { client, url: url.into(), token })
    }
}

#[async_trait]
impl TextGenerator for HttpEndpoint {
    async fn generate(&self, model: &str, request: &GenerationRequest) -> std::result::Result<String, EndpointError> {
        let mut req = self.client.post(&self.url).json(&WireRequest::new(model, request));
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let response = req.send().await.map_err(|e| EndpointError::Transient(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(EndpointError::Transient(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(EndpointError::Permanent(format!("endpoint returned {status}")));
        }
        let body = response.bytes().await.map_err(|e| EndpointError::Transient(e.to_string()))?;
        serde_json::from_slice::<WireResponse>(&body)
            .map(|r| r.text)
            .map_err(|e| EndpointError::Permanent(format!("malformed endpoint response: {e}")))
    }
}

/// Terminates a final line left unfinished by an interrupted writer, so the
/// next append starts on a fresh line.
fn seal_torn_tail(file: &mut File) -> Result<()> {
    use std::io::{Read, Seek, SeekFrom};
    file.lock()?;
    let result = (|| {
        let len = file.metadata()?.len();
        if len == 0 {
            return Ok(());
        }
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1))?;
        file.read_exact(&mut last)?;
        if last[0] != b'\n' {
            file.write_all(b"\n")?;
        }
        Ok(())
    })();
    file.unlock()?;
    result
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    text: String,
}

/// Append-only generation store: one `{"key", "text"}` JSON line per entry
/// in `<dir>/generations.jsonl`.
///
/// Safe to share between tasks of one process. Appends take an exclusive
/// file lock so several processes can write to the same store.
#[derive(Debug)]
pub struct GenerationCache {
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    file: Mutex<File>,
}

impl GenerationCache {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join("generations.jsonl");
        let mut file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        seal_torn_tail(&mut file)?;
        let mut entries = HashMap::new();
        {
            let reader = File::open(&path)?;
            reader.lock_shared()?;
            for (n, line) in BufReader::new(&reader).lines().enumerate() {
                let line = line?;
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(entry) => {
                        entries.entry(entry.key).or_insert(entry.text);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable cache line: {e}", path.display(), n + 1),
                }
            }
            reader.unlock()?;
        }
        Ok(Self { path, entries: Mutex::new(entries), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().expect("cache index poisoned").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        {
            let mut entries = self.entries.lock().expect("cache index poisoned");
            if entries.contains_key(key) {
                return Ok(());
            }
            entries.insert(key.to_owned(), text.to_owned());
        }
        let mut line = serde_json::to_vec(&CacheLine { key: key.to_owned(), text: text.to_owned() })?;
        line.push(b'\n');
        let mut file = self.file.lock().expect("cache file poisoned");
        file.lock()?;
        let written = file.write_all(&line).and_then(|_| file.flush());
        file.unlock()?;
        written?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub model: String,
    pub concurrency: usize,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            model: String::new(),
            concurrency: 8,
            max_retries: 3,
            backoff: Duration::from_millis(250),
        }
    }
}

/// Outcome of one request. Cache hits report zero attempts and zero latency,
/// so a fully cached rerun reproduces its records exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub generation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
    pub attempts: u32,
    pub cache_hit: bool,
}

pub struct InferenceClient<G> {
    generator: G,
    config: ClientConfig,
    cache: Option<GenerationCache>,
}

impl<G: TextGenerator> InferenceClient<G> {
    pub fn new(generator: G, config: ClientConfig, cache: Option<GenerationCache>) -> Result<Self> {
        if config.concurrency == 0 {
            return Err(Error::Inference("concurrency must be at least 1".into()));
        }
        Ok(Self { generator, config, cache })
    }

    pub fn generator(&self) -> &G {
        &self.generator
    }

    pub fn cache(&self) -> Option<&GenerationCache> {
        self.cache.as_ref()
    }

    /// Answers every request. Record `i` belongs to request `i`; failures
    /// become records with `error` set rather than aborting the batch.
    pub async fn generate_batch(&self, requests: &[GenerationRequest]) -> Vec<GenerationRecord> {
        stream::iter(requests.iter().map(|r| self.generate_one(r)))
            .buffered(self.config.concurrency)
            .collect()
            .await
    }

    async fn generate_one(&self, request: &GenerationRequest) -> GenerationRecord {
        let started = Instant::now();
        let mut record = GenerationRecord {
            id: request.id.clone(),
            generation: None,
            error: None,
            latency_ms: 0,
            attempts: 0,
            cache_hit: false,
        };
        if let Err(reason) = request.validate() {
            record.error = Some(reason);
            return record;
        }
        let key = cache_key(&self.config.model, request);
        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            record.generation = Some(text);
            record.cache_hit = true;
            return record;
        }
        let mut delay = self.config.backoff;
        loop {
            record.attempts += 1;
            match self.generator.generate(&self.config.model, request).await {
                Ok(text) => {
                    if let Some(cache) = &self.cache {
                        if let Err(e) = cache.put(&key, &text) {
                            log::warn!("could not cache generation for {}: {e}", request.id);
                        }
                    }
                    record.generation = Some(text);
                    break;
                }
                Err(EndpointError::Transient(e)) if record.attempts <= self.config.max_retries => {
                    log::debug!("{}: attempt {} failed ({e}); retrying", request.id, record.attempts);
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
                Err(e) => {
                    record.error = Some(e.to_string());
                    break;
                }
            }
        }
        record.latency_ms = started.elapsed().as_millis() as u64;
        record
    }
}

//! Provider-agnostic clients for embeddings and chat completions.
//!
//! Both clients speak the de facto `/v1/embeddings` and
//! `/v1/chat/completions` JSON schemas against a configurable base URL, so
//! the same binary drives hosted models, local inference servers, and the
//! in-process mock used by the tests.
//!
//! Every response is recorded in a content-addressed [`ResponseCache`]
//! before it is returned; repeated requests — including whole reruns of an
//! experiment — replay from disk without touching the network. The API
//! credential is read from an environment variable (default
//! `XCLONE_API_KEY`) and is only required when a request actually misses
//! the cache.

mod cache;
mod http;

pub use cache::{chat_key, content_key, embed_key, CacheKind, ResponseCache};

use http::HttpApi;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

/// Default environment variable holding the API credential.
pub const DEFAULT_API_KEY_ENV: &str = "XCLONE_API_KEY";

/// Errors raised by the provider clients.
#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    /// A request missed the cache and no credential is set.
    #[error("missing API credential: set the `{0}` environment variable")]
    MissingCredential(String),
    /// The provider rejected the credential (HTTP 401/403). Not retried.
    #[error("authentication rejected by provider")]
    Auth,
    /// Still rate-limited after exhausting retries.
    #[error("rate limited by provider after {attempts} attempts")]
    RateLimited { attempts: u32 },
    /// Any other provider-reported failure.
    #[error("provider error (status {status}): {excerpt}")]
    Upstream { status: u16, excerpt: String },
    /// The provider answered with empty content.
    #[error("provider returned empty content")]
    EmptyResponse,
    /// The provider returned an all-zero embedding.
    #[error("provider returned a zero embedding vector")]
    ZeroEmbedding,
    /// Embedding dimension changed mid-run for the same model.
    #[error("embedding dimension changed mid-run: expected {expected}, got {got}")]
    DimensionDrift { expected: usize, got: usize },
    /// Connection-level failure (DNS, refused, timeout, …).
    #[error("transport failure: {0}")]
    Transport(String),
    /// Cache file could not be read or written.
    #[error("cache failure: {0}")]
    Cache(String),
    /// A request violated a client-side precondition.
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Connection, model, and retry settings shared by both clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Server root, e.g. `https://api.openai.com` or `http://127.0.0.1:8080`.
    pub base_url: String,
    /// Environment variable that holds the credential. Never a flag or a
    /// config value: secrets do not belong in files or shell history.
    pub api_key_env: String,
    /// Model id for `/v1/embeddings`.
    pub embedding_model: String,
    /// Model id for `/v1/chat/completions`.
    pub chat_model: String,
    /// Texts per embeddings request.
    pub batch_size: usize,
    /// Maximum HTTP requests outstanding at any instant.
    pub max_in_flight: usize,
    /// Retries after the first try (3 retries = up to 4 tries).
    pub retry_attempts: u32,
    /// Base backoff in milliseconds, doubled per retry.
    pub retry_base_ms: u64,
    /// Sampling temperature for chat; 0 keeps evaluation runs deterministic.
    pub temperature: f64,
    /// Completion budget per chat request.
    pub max_tokens: u32,
    /// Per-request timeout in seconds.
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            embedding_model: "text-embedding-3-large".into(),
            chat_model: "gpt-3.5-turbo".into(),
            batch_size: 64,
            max_in_flight: 4,
            retry_attempts: 3,
            retry_base_ms: 250,
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 60,
        }
    }
}

/// One embedding, tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_id: String,
    /// Always `values.len()`; kept explicit because consumers key on it.
    pub dim: usize,
}

/// Chat participant role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// One message in a chat conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
}

/// A chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Token accounting reported by the provider.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// A chat-completion response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: String,
    #[serde(default)]
    pub usage: Usage,
}

/// Anything that can turn texts into vectors: the HTTP client, or an
/// in-process mock in tests.
pub trait TextEmbedder {
    /// Embed `texts`, one vector per input, order-preserving.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

impl TextEmbedder for EmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(self.embed_texts(texts)?.into_iter().map(|v| v.values).collect())
    }
}

/// Client for `/v1/embeddings` with per-text caching, dedup, batching, and
/// bounded-concurrency dispatch.
pub struct EmbeddingClient {
    api: HttpApi,
    cache: Arc<ResponseCache>,
    model: String,
    batch_size: usize,
    max_in_flight: usize,
    dim_seen: Mutex<Option<usize>>,
}

impl EmbeddingClient {
    pub fn new(config: &ProviderConfig, cache: Arc<ResponseCache>) -> Result<Self, ProviderError> {
        Ok(Self {
            api: HttpApi::new(
                &config.base_url,
                &config.api_key_env,
                config.retry_attempts,
                config.retry_base_ms,
                config.max_in_flight,
                Duration::from_secs(config.timeout_secs),
            )?,
            cache,
            model: config.embedding_model.clone(),
            batch_size: config.batch_size.max(1),
            max_in_flight: config.max_in_flight.max(1),
            dim_seen: Mutex::new(None),
        })
    }

    /// Model id this client embeds with.
    pub fn model(&self) -> &str {
        &self.model
    }

    /// Embed `texts`, preserving input order. Cached texts are served from
    /// disk; the rest are deduplicated, batched (`batch_size` per request),
    /// and fetched with at most `max_in_flight` requests outstanding.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(ProviderError::InvalidRequest("cannot embed an empty text".into()));
        }
        let keys: Vec<String> = texts.iter().map(|t| embed_key(&self.model, t)).collect();
        // Misses, deduplicated by key in first-appearance order.
        let mut miss_keys: Vec<String> = Vec::new();
        let mut miss_texts: Vec<String> = Vec::new();
        for (key, text) in keys.iter().zip(texts) {
            if self.cache.get(key).is_none() && !miss_keys.contains(key) {
                miss_keys.push(key.clone());
                miss_texts.push(text.clone());
            }
        }
        if !miss_texts.is_empty() {
            if !self.api.has_credential() {
                return Err(ProviderError::MissingCredential(
                    self.api.credential_env().to_string(),
                ));
            }
            self.fetch_misses(&miss_keys, &miss_texts)?;
        }
        keys.iter()
            .map(|key| {
                let payload = self
                    .cache
                    .get(key)
                    .ok_or_else(|| ProviderError::Cache(format!("key {key} vanished")))?;
                let values: Vec<f64> = serde_json::from_value(
                    payload
                        .get("embedding")
                        .cloned()
                        .ok_or_else(|| ProviderError::Cache("malformed embed payload".into()))?,
                )
                .map_err(|e| ProviderError::Cache(e.to_string()))?;
                self.check_vector(&values)?;
                Ok(EmbeddingVector { dim: values.len(), values, model_id: self.model.clone() })
            })
            .collect()
    }

    /// Fan batches out over a small worker pool and cache every result.
    fn fetch_misses(&self, keys: &[String], texts: &[String]) -> Result<(), ProviderError> {
        let batches: Vec<(usize, &[String])> = texts
            .chunks(self.batch_size)
            .enumerate()
            .map(|(i, chunk)| (i * self.batch_size, chunk))
            .collect();
        let queue: Mutex<std::collections::VecDeque<(usize, &[String])>> =
            Mutex::new(batches.into_iter().collect());
        let results: Mutex<HashMap<usize, Vec<Vec<f64>>>> = Mutex::new(HashMap::new());
        let failure: Mutex<Option<ProviderError>> = Mutex::new(None);
        let workers = self.max_in_flight.min(texts.len().div_ceil(self.batch_size)).max(1);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let Some((offset, chunk)) = queue.lock().expect("queue lock").pop_front()
                    else {
                        return;
                    };
                    match self.fetch_batch(chunk) {
                        Ok(vectors) => {
                            results.lock().expect("results lock").insert(offset, vectors);
                        }
                        Err(e) => {
                            failure.lock().expect("failure lock").get_or_insert(e);
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().expect("failure lock") {
            return Err(e);
        }
        let results = results.into_inner().expect("results lock");
        for (offset, vectors) in results {
            for (i, values) in vectors.into_iter().enumerate() {
                self.check_vector(&values)?;
                self.cache.put(
                    &keys[offset + i],
                    CacheKind::Embed,
                    serde_json::json!({ "embedding": values, "model": self.model }),
                )?;
            }
        }
        Ok(())
    }

    fn fetch_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = serde_json::json!({
            "model": self.model,
            "input": texts,
            "encoding_format": "float",
        });
        let response = self.api.post_json("/v1/embeddings", &body)?;
        let data = response
            .get("data")
            .and_then(|d| d.as_array())
            .ok_or_else(|| malformed(&response))?;
        if data.len() != texts.len() {
            return Err(ProviderError::Upstream {
                status: 200,
                excerpt: format!("expected {} embeddings, got {}", texts.len(), data.len()),
            });
        }
        // The schema tags each vector with its input index; order by it.
        let mut ordered: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for item in data {
            let index = item.get("index").and_then(|i| i.as_u64()).ok_or_else(|| malformed(item))?
                as usize;
            let values: Vec<f64> = item
                .get("embedding")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .map_err(|_| malformed(item))?
                .ok_or_else(|| malformed(item))?;
            if index >= texts.len() {
                return Err(malformed(item));
            }
            ordered[index] = Some(values);
        }
        ordered
            .into_iter()
            .map(|v| v.ok_or_else(|| malformed(&response)))
            .collect()
    }

    fn check_vector(&self, values: &[f64]) -> Result<(), ProviderError> {
        if values.iter().all(|v| *v == 0.0) {
            return Err(ProviderError::ZeroEmbedding);
        }
        let mut seen = self.dim_seen.lock().expect("dim lock");
        match *seen {
            Some(dim) if dim != values.len() => {
                Err(ProviderError::DimensionDrift { expected: dim, got: values.len() })
            }
            Some(_) => Ok(()),
            None => {
                *seen = Some(values.len());
                Ok(())
            }
        }
    }
}

/// Client for `/v1/chat/completions` with whole-request caching.
pub struct ChatClient {
    api: HttpApi,
    cache: Arc<ResponseCache>,
    model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatClient {
    pub fn new(config: &ProviderConfig, cache: Arc<ResponseCache>) -> Result<Self, ProviderError> {
        Ok(Self {
            api: HttpApi::new(
                &config.base_url,
                &config.api_key_env,
                config.retry_attempts,
                config.retry_base_ms,
                config.max_in_flight,
                Duration::from_secs(config.timeout_secs),
            )?,
            cache,
            model: config.chat_model.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        })
    }

    /// Model id this client chats with.
    pub fn model(&self) -> &str {
        &self.model
    }

    /// Build a single-user-message request with this client's settings.
    pub fn request(&self, content: impl Into<String>) -> ChatRequest {
        self.request_messages(vec![ChatMessage::user(content)])
    }

    /// Build a request around pre-rendered messages (e.g. from the prompt
    /// templates) with this client's settings.
    pub fn request_messages(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model_id: self.model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    /// Send a chat request, replaying byte-identically from the cache when
    /// the same request was answered before.
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        validate_chat_request(request)?;
        let key = chat_key(
            &request.model_id,
            &request.messages,
            request.temperature,
            request.max_tokens,
        );
        if let Some(payload) = self.cache.get(&key) {
            return serde_json::from_value(payload).map_err(|e| ProviderError::Cache(e.to_string()));
        }
        if !self.api.has_credential() {
            return Err(ProviderError::MissingCredential(self.api.credential_env().to_string()));
        }
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| serde_json::json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let body = serde_json::json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let raw = self.api.post_json("/v1/chat/completions", &body)?;
        let choice = raw
            .get("choices")
            .and_then(|c| c.as_array())
            .and_then(|c| c.first())
            .ok_or_else(|| malformed(&raw))?;
        let content = choice
            .pointer("/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| malformed(&raw))?
            .to_string();
        if content.trim().is_empty() {
            return Err(ProviderError::EmptyResponse);
        }
        let response = ChatResponse {
            content,
            finish_reason: choice
                .get("finish_reason")
                .and_then(|f| f.as_str())
                .unwrap_or("stop")
                .to_string(),
            usage: raw
                .get("usage")
                .cloned()
                .map(serde_json::from_value)
                .transpose()
                .unwrap_or_default()
                .unwrap_or_default(),
        };
        let payload =
            serde_json::to_value(&response).map_err(|e| ProviderError::Cache(e.to_string()))?;
        self.cache.put(&key, CacheKind::Chat, payload)?;
        Ok(response)
    }
}

fn validate_chat_request(request: &ChatRequest) -> Result<(), ProviderError> {
    if request.messages.is_empty() {
        return Err(ProviderError::InvalidRequest("messages must be non-empty".into()));
    }
    if let Some(first) = request.messages.iter().find(|m| m.role != Role::System) {
        if first.role != Role::User {
            return Err(ProviderError::InvalidRequest(
                "first non-system message must have role=user".into(),
            ));
        }
    }
    Ok(())
}

fn malformed(value: &serde_json::Value) -> ProviderError {
    let text = value.to_string();
    let excerpt: String = text.chars().take(200).collect();
    ProviderError::Upstream { status: 200, excerpt: format!("malformed response: {excerpt}") }
}

//! JSON-over-HTTP transport with retries, backoff, and a concurrency gate.

use super::ProviderError;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

/// Counting semaphore bounding outstanding HTTP requests.
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().expect("semaphore lock") += 1;
        self.available.notify_one();
    }
}

/// Low-level client: owns the connection pool, credential, retry policy,
/// and the in-flight gate shared by all requests it dispatches.
pub(crate) struct HttpApi {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    api_key_env: String,
    retry_attempts: u32,
    retry_base_ms: u64,
    gate: Arc<Semaphore>,
}

impl HttpApi {
    pub(crate) fn new(
        base_url: &str,
        api_key_env: &str,
        retry_attempts: u32,
        retry_base_ms: u64,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()),
            api_key_env: api_key_env.to_string(),
            retry_attempts,
            retry_base_ms,
            gate: Arc::new(Semaphore::new(max_in_flight)),
        })
    }

    /// Whether a credential was found in the environment.
    pub(crate) fn has_credential(&self) -> bool {
        self.api_key.is_some()
    }

    pub(crate) fn credential_env(&self) -> &str {
        &self.api_key_env
    }

    /// POST `body` to `path`, retrying transport errors, 429s, and 5xx
    /// responses with exponential backoff. 401/403 fail immediately.
    pub(crate) fn post_json(
        &self,
        path: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        let total_tries = self.retry_attempts + 1;
        let mut last_error = ProviderError::Transport("no attempt made".into());
        for attempt in 0..total_tries {
            if attempt > 0 {
                let backoff = self.retry_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.try_once(&url, body) {
                Ok(value) => return Ok(value),
                Err(e) if retryable(&e) => last_error = e,
                Err(e) => return Err(e),
            }
        }
        if matches!(last_error, ProviderError::RateLimited { .. }) {
            return Err(ProviderError::RateLimited { attempts: total_tries });
        }
        Err(last_error)
    }

    fn try_once(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, ProviderError> {
        self.gate.acquire();
        let result = self.send(url, body);
        self.gate.release();
        result
    }

    fn send(&self, url: &str, body: &serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let mut request = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {
                serde_json::from_str(&text).map_err(|_| ProviderError::Upstream {
                    status,
                    excerpt: excerpt(&text),
                })
            }
            401 | 403 => Err(ProviderError::Auth),
            429 => Err(ProviderError::RateLimited { attempts: 1 }),
            _ => Err(ProviderError::Upstream { status, excerpt: excerpt(&text) }),
        }
    }
}

fn retryable(error: &ProviderError) -> bool {
    match error {
        ProviderError::Transport(_) | ProviderError::RateLimited { .. } => true,
        ProviderError::Upstream { status, .. } => *status >= 500,
        _ => false,
    }
}

/// First 200 chars of a response body, for error messages.
fn excerpt(text: &str) -> String {
    let mut out: String = text.chars().take(200).collect();
    if out.len() < text.len() {
        out.push('…');
    }
    out
}

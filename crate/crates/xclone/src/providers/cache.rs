//! Append-only, content-addressed response cache.
//!
//! One JSONL line per entry: `{"key", "kind", "payload", "created_at"}`.
//! The key is a SHA-256 digest of the canonicalized request, so identical
//! requests share one entry and a recorded run replays offline with
//! byte-identical payloads. The file is human-inspectable and diff-friendly;
//! on duplicate keys the last writer wins. Unparseable lines (e.g. a write
//! cut short by a crash) are skipped on load.

use super::ProviderError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

/// Which provider surface produced a cached payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheKind {
    Embed,
    Chat,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    kind: CacheKind,
    payload: serde_json::Value,
    created_at: u64,
}

/// Persistent response cache shared by the provider clients.
///
/// Reads hit the index loaded at open time without locking; entries added
/// during the run live in a mutex-guarded delta. Appends go through a
/// single writer and are flushed per entry, so an interrupted run loses at
/// most the line being written.
pub struct ResponseCache {
    path: PathBuf,
    loaded: HashMap<String, serde_json::Value>,
    delta: Mutex<HashMap<String, serde_json::Value>>,
    writer: Mutex<File>,
}

impl ResponseCache {
    /// Open (or create) the cache file at `path` and load its index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| ProviderError::Cache(e.to_string()))?;
            }
        }
        let mut loaded = HashMap::new();
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                for line in text.lines() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    // Tolerate torn writes: skip what does not parse.
                    if let Ok(entry) = serde_json::from_str::<CacheLine>(line) {
                        loaded.insert(entry.key, entry.payload);
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(ProviderError::Cache(e.to_string())),
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ProviderError::Cache(e.to_string()))?;
        Ok(Self { path, loaded, delta: Mutex::new(HashMap::new()), writer: Mutex::new(writer) })
    }

    /// Location of the backing file.
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Look up a payload by key.
    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        if let Some(v) = self.delta.lock().expect("cache delta lock").get(key) {
            return Some(v.clone());
        }
        self.loaded.get(key).cloned()
    }

    /// Append an entry and make it visible to readers immediately.
    pub fn put(
        &self,
        key: &str,
        kind: CacheKind,
        payload: serde_json::Value,
    ) -> Result<(), ProviderError> {
        let line = CacheLine {
            key: key.to_string(),
            kind,
            payload: payload.clone(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        let json = serde_json::to_string(&line).map_err(|e| ProviderError::Cache(e.to_string()))?;
        {
            let mut writer = self.writer.lock().expect("cache writer lock");
            writeln!(writer, "{json}").map_err(|e| ProviderError::Cache(e.to_string()))?;
            writer.flush().map_err(|e| ProviderError::Cache(e.to_string()))?;
        }
        self.delta.lock().expect("cache delta lock").insert(key.to_string(), payload);
        Ok(())
    }

    /// Number of distinct keys currently visible.
    pub fn len(&self) -> usize {
        let delta = self.delta.lock().expect("cache delta lock");
        let fresh = delta.keys().filter(|k| !self.loaded.contains_key(*k)).count();
        self.loaded.len() + fresh
    }

    /// Whether the cache holds no entries.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// SHA-256 hex digest of a canonical JSON value. `serde_json` sorts object
/// keys, so logically equal requests hash identically.
pub fn content_key(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)
}

/// Cache key for one embedding input under `model`.
pub fn embed_key(model: &str, text: &str) -> String {
    content_key(&serde_json::json!({
        "kind": "embed",
        "model": model,
        "input": text,
    }))
}

/// Cache key for a chat request.
pub fn chat_key(
    model: &str,
    messages: &[super::ChatMessage],
    temperature: f64,
    max_tokens: u32,
) -> String {
    let messages: Vec<serde_json::Value> = messages
        .iter()
        .map(|m| serde_json::json!({"role": m.role.as_str(), "content": m.content}))
        .collect();
    content_key(&serde_json::json!({
        "kind": "chat",
        "model": model,
        "messages": messages,
        "temperature": temperature,
        "max_tokens": max_tokens,
    }))
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ChatRequest, ProviderError};
use crate::hashing::sha256_hex;
use crate::jsonl::write_atomic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CacheError {
    #[error("cache io error at {path}: {message}")]
    Io { path: String, message: String },
    #[error("cache record {path} failed verification: {reason}")]
    Corrupt { path: String, reason: String },
}

/// Identifies one cached provider call. The digests are SHA-256 over
/// canonical JSON, so identical requests always map to the same key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub provider_id: String,
    pub model_id: String,
    pub parameter_digest: String,
    pub prompt_digest: String,
}

impl CacheKey {
    pub fn for_chat(provider_id: &str, request: &ChatRequest) -> Self {
        let params = serde_json::json!({
            "kind": "chat",
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        Self {
            provider_id: provider_id.to_string(),
            model_id: request.model_id.clone(),
            parameter_digest: sha256_hex(params.to_string().as_bytes()),
            prompt_digest: sha256_hex(request.prompt.as_bytes()),
        }
    }

    pub fn for_embedding(embedder_id: &str, text: &str) -> Self {
        Self {
            provider_id: embedder_id.to_string(),
            model_id: embedder_id.to_string(),
            parameter_digest: sha256_hex(br#"{"kind":"embedding"}"#),
            prompt_digest: sha256_hex(text.as_bytes()),
        }
    }

    /// Content address of the record file.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("cache key serializes");
        sha256_hex(canonical.as_bytes())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub value: serde_json::Value,
    pub checksum: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cached<T> {
    Hit(T),
    Miss(T),
}

impl<T> Cached<T> {
    pub fn into_inner(self) -> T {
        match self {
            Cached::Hit(v) | Cached::Miss(v) => v,
        }
    }

    pub fn is_hit(&self) -> bool {
        matches!(self, Cached::Hit(_))
    }
}

/// One JSON file per key under `<dir>/<2 hex>/<digest>.json`.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

fn checksum(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let digest = key.digest();
        self.dir.join(&digest[..2]).join(format!("{digest}.json"))
    }

    /// Reads a verified record. Missing files are `Ok(None)`; unreadable or
    /// tampered ones are `Err(Corrupt)`.
    pub fn get<T: DeserializeOwned>(&self, key: &CacheKey) -> Result<Option<T>, CacheError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(CacheError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            }
        };
        let corrupt = |reason: String| CacheError::Corrupt {
            path: path.display().to_string(),
            reason,
        };
        let record: CacheRecord =
            serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if record.key != *key {
            return Err(corrupt("key mismatch".into()));
        }
        if checksum(&record.value) != record.checksum {
            return Err(corrupt("checksum mismatch".into()));
        }
        serde_json::from_value(record.value)
            .map(Some)
            .map_err(|e| corrupt(e.to_string()))
    }

    pub fn put<T: Serialize>(&self, key: &CacheKey, value: &T) -> Result<(), CacheError> {
        let value = serde_json::to_value(value).expect("cached values serialize");
        let record = CacheRecord {
            key: key.clone(),
            checksum: checksum(&value),
            value,
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let path = self.path_for(key);
        let bytes = serde_json::to_vec(&record).expect("cache record serializes");
        write_atomic(&path, &bytes).map_err(|e| CacheError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Returns the stored value without calling `compute`, or computes,
    /// stores and returns it. A corrupt record is logged and replaced.
    pub fn cached<T, F>(&self, key: &CacheKey, compute: F) -> Result<Cached<T>, ProviderError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, ProviderError>,
    {
        match self.get(key) {
            Ok(Some(v)) => return Ok(Cached::Hit(v)),
            Ok(None) => {}
            Err(CacheError::Corrupt { path, reason }) => {
                log::warn!("discarding corrupt cache record {path}: {reason}");
            }
            Err(e) => return Err(e.into()),
        }
        let value = compute()?;
        self.put(key, &value)?;
        Ok(Cached::Miss(value))
    }
}

//! Chat-completion and embedding backends.
//!
//! Backends implement [`ChatBackend`] or [`EmbeddingBackend`]. The
//! [`ChatClient`] and [`EmbedClient`] wrappers add the persistent
//! [`ResponseCache`], retries with exponential backoff and a shared
//! [`RateLimiter`] in front of remote backends. Offline runs use
//! [`MockChat`] and [`HashedBagEmbedder`], both pure functions of their
//! input.

mod cache;
mod chat;
mod clock;
mod embed;
mod ratelimit;
mod remote;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cache::{CacheError, CacheKey, CacheRecord, Cached, ResponseCache};
pub use chat::{load_recorded, MockChat, RecordedResponse};
pub use clock::{Clock, ManualClock, SystemClock};
pub use embed::{HashedBagEmbedder, BAG_DIM};
pub use ratelimit::RateLimiter;
pub use remote::{RemoteChat, RemoteEmbedder, CHAT_KEY_VAR, EMBED_KEY_VAR};

/// Embedding model the reference configuration points a remote
/// embedding service at.
pub const REFERENCE_EMBED_MODEL: &str = "sentence-transformers/all-mpnet-base-v2";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("gave up after {attempts} attempts: {last}")]
    Timeout { attempts: u32, last: String },
    #[error("authentication rejected by {provider}: {message}")]
    AuthFailure { provider: String, message: String },
    #[error("provider rejected request: {0}")]
    ProviderRejection(String),
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("missing credentials: set the {var} environment variable")]
    MissingCredentials { var: String },
    #[error("input text is empty")]
    EmptyInput,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub prompt: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// The prompt is the question text verbatim with no system preamble.
    pub fn verbatim(prompt: impl Into<String>, params: &PromptParams) -> Self {
        Self {
            prompt: prompt.into(),
            model_id: params.model_id.clone(),
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        }
    }

    fn validate(&self) -> Result<(), ProviderError> {
        if self.prompt.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if self.temperature.is_nan() || self.temperature < 0.0 || self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} / max_tokens {}",
                self.temperature, self.max_tokens
            )));
        }
        Ok(())
    }
}

/// Generation parameters recorded in every run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for PromptParams {
    fn default() -> Self {
        Self {
            model_id: "gpt-4".into(),
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub token_count: u32,
    /// Zero for cache hits.
    pub provider_latency_ms: f64,
}

pub fn whitespace_tokens(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub dim: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            dim: values.len(),
            values,
            normalized: false,
        }
    }

    /// Scales to unit L2 norm. Returns `None` for the zero vector.
    pub fn normalized(values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Self {
            dim: values.len(),
            values: values.into_iter().map(|v| v / norm).collect(),
            normalized: true,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub trait ChatBackend: Send + Sync {
    fn provider_id(&self) -> &str;
    fn is_remote(&self) -> bool;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

pub trait EmbeddingBackend: Send + Sync {
    fn embedder_id(&self) -> String;
    fn is_remote(&self) -> bool;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

/// Exponential backoff: attempt `i` (0-based) that fails transiently waits
/// `base * 2^i`, scaled by a uniform factor in `1 ± jitter`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: std::time::Duration,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: std::time::Duration::from_secs(1),
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, attempt: u32, rng: &mut impl Rng) -> std::time::Duration {
        let nominal = self.base_delay.as_secs_f64() * 2f64.powi(attempt as i32);
        let factor = if self.jitter > 0.0 {
            1.0 + rng.random_range(-self.jitter..=self.jitter)
        } else {
            1.0
        };
        std::time::Duration::from_secs_f64((nominal * factor).max(0.0))
    }

    /// Runs `call` until it succeeds, fails permanently, or the attempt
    /// budget is spent.
    pub fn run<T>(
        &self,
        clock: &dyn Clock,
        mut call: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let mut rng = rand::rng();
        let attempts = self.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match call() {
                Ok(v) => return Ok(v),
                Err(ProviderError::Transient(msg)) => {
                    log::warn!("attempt {}/{attempts} failed: {msg}", attempt + 1);
                    last = msg;
                    if attempt + 1 < attempts {
                        clock.sleep(self.delay_for(attempt, &mut rng));
                    }
                }
                Err(other) => return Err(other),
            }
        }
        Err(ProviderError::Timeout { attempts, last })
    }
}

/// Cache-backed, retrying, rate-limited front end for a chat backend.
#[derive(Clone)]
pub struct ChatClient {
    backend: Arc<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
    clock: Arc<dyn Clock>,
}

impl ChatClient {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: None,
            clock: Arc::new(SystemClock::new()),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn provider_id(&self) -> &str {
        self.backend.provider_id()
    }

    pub fn chat_complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let call = || {
            self.retry.run(self.clock.as_ref(), || {
                if self.backend.is_remote() {
                    if let Some(limiter) = &self.limiter {
                        limiter.acquire();
                    }
                }
                self.backend.complete(request)
            })
        };
        match &self.cache {
            None => call(),
            Some(cache) => {
                let key = CacheKey::for_chat(self.backend.provider_id(), request);
                match cache.cached(&key, call)? {
                    Cached::Hit(mut response) => {
                        response.provider_latency_ms = 0.0;
                        Ok(response)
                    }
                    Cached::Miss(response) => Ok(response),
                }
            }
        }
    }
}

/// Front end for an embedding backend. Remote embeddings are cached and
/// rate-limited; local embedders are called directly.
#[derive(Clone)]
pub struct EmbedClient {
    backend: Arc<dyn EmbeddingBackend>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
    clock: Arc<dyn Clock>,
}

impl EmbedClient {
    pub fn new(backend: Arc<dyn EmbeddingBackend>) -> Self {
        Self {
            backend,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: None,
            clock: Arc::new(SystemClock::new()),
        }
    }

    pub fn deterministic() -> Self {
        Self::new(Arc::new(HashedBagEmbedder::default()))
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn embedder_id(&self) -> String {
        self.backend.embedder_id()
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        if !self.backend.is_remote() {
            return self.backend.embed(text);
        }
        let call = || {
            self.retry.run(self.clock.as_ref(), || {
                if let Some(limiter) = &self.limiter {
                    limiter.acquire();
                }
                self.backend.embed(text)
            })
        };
        match &self.cache {
            None => call(),
            Some(cache) => {
                let key = CacheKey::for_embedding(&self.backend.embedder_id(), text);
                Ok(cache.cached(&key, call)?.into_inner())
            }
        }
    }
}

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{whitespace_tokens, ChatBackend, ChatRequest, ChatResponse, ProviderError};
use crate::jsonl;

/// One prompt/answer pair from a recorded-response fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub prompt: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u32>,
}

pub fn load_recorded(path: &Path) -> Result<Vec<RecordedResponse>, jsonl::JsonlError> {
    jsonl::read(path)
}

/// Offline chat backend answering from a canned prompt map. Prompts without
/// a recording get a fixed deterministic placeholder answer.
#[derive(Debug, Default)]
pub struct MockChat {
    canned: HashMap<String, RecordedResponse>,
    invocations: AtomicUsize,
}

impl MockChat {
    pub fn new(recorded: impl IntoIterator<Item = RecordedResponse>) -> Self {
        Self {
            canned: recorded
                .into_iter()
                .map(|r| (r.prompt.clone(), r))
                .collect(),
            invocations: AtomicUsize::new(0),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self::new(pairs.into_iter().map(|(p, t)| RecordedResponse {
            prompt: p.into(),
            text: t.into(),
            token_count: None,
        }))
    }

    /// Number of times `complete` has run (cache hits never reach it).
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }
}

impl ChatBackend for MockChat {
    fn provider_id(&self) -> &str {
        "mock"
    }

    fn is_remote(&self) -> bool {
        false
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let (text, tokens) = match self.canned.get(&request.prompt) {
            Some(r) => (r.text.clone(), r.token_count),
            None => (format!("No recorded answer for: {}", request.prompt), None),
        };
        Ok(ChatResponse {
            token_count: tokens.unwrap_or_else(|| whitespace_tokens(&text)),
            text,
            provider_latency_ms: 0.0,
        })
    }
}

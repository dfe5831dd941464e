//! OpenAI-compatible HTTPS backends (`/chat/completions`, `/embeddings`).

use std::time::{Duration, Instant};

use serde_json::{json, Value};
use ureq::Agent;

use super::{
    whitespace_tokens, ChatBackend, ChatRequest, ChatResponse, EmbeddingBackend, EmbeddingVector,
    ProviderError,
};

pub const CHAT_KEY_VAR: &str = "TURNPILOT_CHAT_KEY";
pub const EMBED_KEY_VAR: &str = "TURNPILOT_EMBED_KEY";

fn agent() -> Agent {
    Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn key_from_env(var: &str) -> Result<String, ProviderError> {
    match std::env::var(var) {
        Ok(k) if !k.trim().is_empty() => Ok(k),
        _ => Err(ProviderError::MissingCredentials { var: var.into() }),
    }
}

fn post(
    agent: &Agent,
    provider: &str,
    url: &str,
    key: &str,
    body: &Value,
) -> Result<Value, ProviderError> {
    let mut response = agent
        .post(url)
        .header("Authorization", &format!("Bearer {key}"))
        .send_json(body)
        .map_err(|e| ProviderError::Transient(e.to_string()))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| ProviderError::Transient(e.to_string()))?;
    match status {
        200..=299 => serde_json::from_str(&text)
            .map_err(|e| ProviderError::ProviderRejection(format!("unparseable body: {e}"))),
        401 | 403 => Err(ProviderError::AuthFailure {
            provider: provider.into(),
            message: text,
        }),
        408 | 429 | 500..=599 => Err(ProviderError::Transient(format!("HTTP {status}: {text}"))),
        _ => Err(ProviderError::ProviderRejection(format!(
            "HTTP {status}: {text}"
        ))),
    }
}

fn join(endpoint: &str, path: &str) -> String {
    format!("{}/{path}", endpoint.trim_end_matches('/'))
}

pub struct RemoteChat {
    provider_id: String,
    endpoint: String,
    key: String,
    agent: Agent,
}

impl RemoteChat {
    pub fn new(provider_id: &str, endpoint: &str, key: String) -> Self {
        Self {
            provider_id: provider_id.into(),
            endpoint: endpoint.into(),
            key,
            agent: agent(),
        }
    }

    /// Reads the API key from `TURNPILOT_CHAT_KEY`.
    pub fn from_env(provider_id: &str, endpoint: &str) -> Result<Self, ProviderError> {
        Ok(Self::new(
            provider_id,
            endpoint,
            key_from_env(CHAT_KEY_VAR)?,
        ))
    }
}

impl ChatBackend for RemoteChat {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn is_remote(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let started = Instant::now();
        let value = post(
            &self.agent,
            &self.provider_id,
            &join(&self.endpoint, "chat/completions"),
            &self.key,
            &body,
        )?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                ProviderError::ProviderRejection("response has no message content".into())
            })?
            .to_string();
        let token_count = value["usage"]["completion_tokens"]
            .as_u64()
            .map(|n| n as u32)
            .unwrap_or_else(|| whitespace_tokens(&text));
        Ok(ChatResponse {
            text,
            token_count,
            provider_latency_ms: started.elapsed().as_secs_f64() * 1000.0,
        })
    }
}

pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    key: String,
    agent: Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, model: &str, key: String) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            key,
            agent: agent(),
        }
    }

    /// Reads the API key from `TURNPILOT_EMBED_KEY`.
    pub fn from_env(endpoint: &str, model: &str) -> Result<Self, ProviderError> {
        Ok(Self::new(endpoint, model, key_from_env(EMBED_KEY_VAR)?))
    }
}

impl EmbeddingBackend for RemoteEmbedder {
    fn embedder_id(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn is_remote(&self) -> bool {
        true
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let body = json!({"model": self.model, "input": text});
        let value = post(
            &self.agent,
            "embeddings",
            &join(&self.endpoint, "embeddings"),
            &self.key,
            &body,
        )?;
        let values: Vec<f64> = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::ProviderRejection("response has no embedding".into()))?
            .iter()
            .map(|v| v.as_f64().unwrap_or(f64::NAN))
            .collect();
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::ProviderRejection(
                "embedding has invalid values".into(),
            ));
        }
        Ok(EmbeddingVector::new(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ChatClient, PromptParams, RetryPolicy};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves the given (status, body) replies, one per connection, and
    /// counts requests.
    fn serve(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; length];
                reader.read_exact(&mut buf).unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1"), hits)
    }

    fn fast_retry() -> RetryPolicy {
        RetryPolicy {
            base_delay: Duration::from_millis(1),
            ..RetryPolicy::default()
        }
    }

    #[test]
    fn parses_openai_style_completion() {
        let body = json!({
            "choices": [{"message": {"role": "assistant", "content": "Jane Austen."}}],
            "usage": {"completion_tokens": 3}
        })
        .to_string();
        let (url, hits) = serve(vec![(200, body)]);
        let chat = RemoteChat::new("openai", &url, "k".into());
        let r = chat
            .complete(&ChatRequest::verbatim(
                "who wrote emma",
                &PromptParams::default(),
            ))
            .unwrap();
        assert_eq!(r.text, "Jane Austen.");
        assert_eq!(r.token_count, 3);
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn server_errors_retry_then_time_out() {
        let (url, hits) = serve(vec![(503, "{}".into()); 3]);
        let client = ChatClient::new(Arc::new(RemoteChat::new("openai", &url, "k".into())))
            .with_retry(fast_retry());
        let err = client
            .chat_complete(&ChatRequest::verbatim("q", &PromptParams::default()))
            .unwrap_err();
        assert!(
            matches!(err, ProviderError::Timeout { attempts: 3, .. }),
            "{err}"
        );
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn unauthorized_and_bad_request() {
        let (url, _) = serve(vec![
            (401, "{\"error\":\"bad key\"}".into()),
            (400, "nope".into()),
        ]);
        let chat = RemoteChat::new("openai", &url, "k".into());
        let req = ChatRequest::verbatim("q", &PromptParams::default());
        assert!(matches!(
            chat.complete(&req),
            Err(ProviderError::AuthFailure { .. })
        ));
        match chat.complete(&req) {
            Err(ProviderError::ProviderRejection(msg)) => assert!(msg.contains("nope")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn remote_embedding() {
        let body = json!({"data": [{"embedding": [0.5, -0.25, 1.0]}]}).to_string();
        let (url, _) = serve(vec![(200, body)]);
        let e = RemoteEmbedder::new(&url, "m", "k".into());
        let v = e.embed("text").unwrap();
        assert_eq!(v.values, vec![0.5, -0.25, 1.0]);
        assert!(!v.normalized);
    }

    #[test]
    fn missing_key_names_variable() {
        std::env::remove_var("TURNPILOT_TEST_UNSET_KEY");
        assert_eq!(
            key_from_env("TURNPILOT_TEST_UNSET_KEY").unwrap_err(),
            ProviderError::MissingCredentials {
                var: "TURNPILOT_TEST_UNSET_KEY".into()
            }
        );
    }
}

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::ClientError;
use crate::config::{EndpointConfig, Token};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for `POST {base_url}/chat/completions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn single_user(config: &EndpointConfig, text: &str) -> Self {
        Self {
            model: config.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: text.to_string(),
            }],
            temperature: 0.0,
            max_tokens: config.max_tokens,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    pub fn is_auth(&self) -> bool {
        matches!(self, TransportError::Status { status: 401 | 403, .. })
    }

    /// Whether a retry might succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Status { status, .. } => *status >= 500 || *status == 429 || *status == 408,
            TransportError::Network(_) | TransportError::Malformed(_) => true,
        }
    }
}

/// Sends one chat request and returns the completion text.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP transport.
#[derive(Debug)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<Token>,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> Result<Self, ClientError> {
        config.validate()?;
        let token = config.resolve_token()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            url: config.completions_url(),
            token,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = self.client.post(&self.url).json(request);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token.expose());
        }
        // reqwest errors carry the URL but never headers.
        let response = builder
            .send()
            .map_err(|e| TransportError::Network(e.without_url().to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| TransportError::Network(e.without_url().to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status {
                status,
                body: truncate(&body, 200),
            });
        }
        extract_content(&body)
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn extract_content(body: &str) -> Result<String, TransportError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(format!("invalid JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_shape() {
        let cfg = EndpointConfig::new("http://x", "some-model");
        let req = ChatRequest::single_user(&cfg, "hello");
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "model": "some-model",
                "messages": [{"role": "user", "content": "hello"}],
                "temperature": 0.0,
                "max_tokens": 5
            })
        );
    }

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"Yes."}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "Yes.");
        assert!(matches!(extract_content("{}"), Err(TransportError::Malformed(_))));
        assert!(matches!(extract_content("<html>"), Err(TransportError::Malformed(_))));
    }

    #[test]
    fn classification() {
        let s = |status| TransportError::Status { status, body: String::new() };
        assert!(s(401).is_auth() && s(403).is_auth());
        assert!(!s(500).is_auth());
        assert!(s(500).is_transient() && s(503).is_transient() && s(429).is_transient());
        assert!(!s(400).is_transient() && !s(404).is_transient());
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate("abc", 5), "abc");
        assert_eq!(truncate("abcdef", 3), "abc...");
    }
}

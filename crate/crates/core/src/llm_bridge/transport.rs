//! Wire adapters. See `docs/llm-wire.md` for the request and response
//! shapes.

use std::env;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::mock::MockTransport;
use super::{EndpointKind, LlmError, LlmProfile, Task};
use crate::corpus::Requirement;

pub const ANTHROPIC_VERSION: &str = "2023-06-01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
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
}

/// One upstream call. `requirement` and `task` are context for transports
/// that need it (the mock); remote transports send only the text.
pub struct ChatRequest<'a> {
    pub profile: &'a LlmProfile,
    pub task: Task,
    pub requirement: &'a Requirement,
    pub system: &'a str,
    pub messages: &'a [ChatMessage],
}

pub trait ChatTransport: Send + Sync {
    /// Returns the model's answer text.
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, LlmError>;
}

/// Builds the transport a profile describes. Remote kinds read their secret
/// from the named environment variable here, once.
pub fn transport_for(profile: &LlmProfile) -> Result<Arc<dyn ChatTransport>, LlmError> {
    match profile.endpoint_kind {
        EndpointKind::Mock => Ok(Arc::new(MockTransport::new(profile.mock.clone().unwrap_or_default()))),
        EndpointKind::OpenAiCompatibleChat => Ok(Arc::new(HttpTransport::new(profile, Wire::OpenAi)?)),
        EndpointKind::AnthropicCompatibleMessages => Ok(Arc::new(HttpTransport::new(profile, Wire::Anthropic)?)),
    }
}

fn api_key(profile: &LlmProfile) -> Result<String, LlmError> {
    let var = profile
        .api_key_env_var
        .as_deref()
        .ok_or_else(|| LlmError::Auth(format!("profile {} names no api_key_env_var", profile.rater_id)))?;
    match env::var(var) {
        Ok(key) if !key.trim().is_empty() => Ok(key),
        _ => Err(LlmError::Auth(format!("environment variable {var} is not set"))),
    }
}

pub fn openai_body(profile: &LlmProfile, system: &str, messages: &[ChatMessage]) -> Value {
    let mut all = vec![json!({"role": "system", "content": system})];
    all.extend(messages.iter().map(|m| json!({"role": m.role, "content": m.content})));
    json!({
        "model": profile.model_name,
        "temperature": profile.temperature,
        "max_tokens": profile.max_output_tokens,
        "response_format": {"type": "json_object"},
        "messages": all,
    })
}

pub fn anthropic_body(profile: &LlmProfile, system: &str, messages: &[ChatMessage]) -> Value {
    json!({
        "model": profile.model_name,
        "temperature": profile.temperature,
        "max_tokens": profile.max_output_tokens,
        "system": system,
        "messages": messages,
    })
}

pub fn openai_answer(envelope: &Value) -> Option<String> {
    envelope["choices"][0]["message"]["content"].as_str().map(str::to_string)
}

pub fn anthropic_answer(envelope: &Value) -> Option<String> {
    let blocks = envelope["content"].as_array()?;
    let text: String = blocks.iter().filter(|b| b["type"] == "text").filter_map(|b| b["text"].as_str()).collect();
    (!blocks.is_empty()).then_some(text)
}

#[derive(Debug, Clone, Copy)]
enum Wire {
    OpenAi,
    Anthropic,
}

struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    key: String,
    wire: Wire,
}

impl HttpTransport {
    fn new(profile: &LlmProfile, wire: Wire) -> Result<Self, LlmError> {
        let key = api_key(profile)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(profile.timeout_ms))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let path = match wire {
            Wire::OpenAi => "chat/completions",
            Wire::Anthropic => "messages",
        };
        let url = format!("{}/{path}", profile.base_url.trim_end_matches('/'));
        Ok(Self { client, url, key, wire })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, LlmError> {
        let builder = self.client.post(&self.url);
        let builder = match self.wire {
            Wire::OpenAi => builder.bearer_auth(&self.key).json(&openai_body(request.profile, request.system, request.messages)),
            Wire::Anthropic => builder
                .header("x-api-key", &self.key)
                .header("anthropic-version", ANTHROPIC_VERSION)
                .json(&anthropic_body(request.profile, request.system, request.messages)),
        };
        let response = builder.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(LlmError::Auth(format!("endpoint rejected credentials ({status})")));
        }
        if !status.is_success() {
            let excerpt: String = body.chars().take(200).collect();
            return Err(LlmError::Transport(format!("HTTP {status}: {excerpt}")));
        }
        let envelope: Value =
            serde_json::from_str(&body).map_err(|e| LlmError::Transport(format!("response envelope is not JSON: {e}")))?;
        let answer = match self.wire {
            Wire::OpenAi => openai_answer(&envelope),
            Wire::Anthropic => anthropic_answer(&envelope),
        };
        answer.ok_or_else(|| LlmError::Transport("response envelope carries no answer text".into()))
    }
}

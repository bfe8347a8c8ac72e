use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend {backend} unavailable: {message}")]
    Unavailable { backend: String, message: String, retryable: bool },
    #[error("scripted backend {backend} ran out of responses after {calls} calls")]
    TranscriptExhausted { backend: String, calls: usize },
}

/// A chat model. Implementations must tolerate concurrent use from
/// several sessions.
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Replays canned responses in order; each call consumes one.
#[derive(Debug)]
pub struct ScriptedBackend {
    name: String,
    responses: Vec<String>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, responses: Vec<String>) -> Self {
        ScriptedBackend { name: name.into(), responses, cursor: Mutex::new(0) }
    }

    /// Reads a JSON array of response strings.
    pub fn from_file(name: impl Into<String>, path: impl AsRef<std::path::Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let responses: Vec<String> = serde_json::from_str(&text).map_err(std::io::Error::other)?;
        Ok(ScriptedBackend::new(name, responses))
    }

    pub fn calls(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.calls()
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let response = self
            .responses
            .get(*cursor)
            .cloned()
            .ok_or_else(|| BackendError::TranscriptExhausted { backend: self.name.clone(), calls: *cursor })?;
        *cursor += 1;
        Ok(response)
    }
}

/// OpenAI-compatible chat-completions endpoint.
#[derive(Debug)]
pub struct HttpChatBackend {
    name: String,
    endpoint: String,
    model: String,
    token_env: Option<String>,
    temperature: f64,
    agent: ureq::Agent,
}

impl HttpChatBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, token_env: Option<String>) -> Self {
        let model = model.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatBackend { name: model.clone(), endpoint: endpoint.into(), model, token_env, temperature: 0.0, agent }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    fn unavailable(&self, message: impl Into<String>, retryable: bool) -> BackendError {
        BackendError::Unavailable { backend: self.name.clone(), message: message.into(), retryable }
    }
}

impl LlmBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        });
        let mut request = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(var) = &self.token_env {
            let token = std::env::var(var)
                .map_err(|_| self.unavailable(format!("environment variable {var} is not set"), false))?;
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(&body).map_err(|e| self.unavailable(e.to_string(), true))?;
        let status = response.status().as_u16();
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            return Err(self.unavailable(format!("HTTP status {status}"), retryable));
        }
        let value: serde_json::Value =
            response.body_mut().read_json().map_err(|e| self.unavailable(format!("unreadable response: {e}"), true))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| self.unavailable("response has no choices[0].message.content", false))
    }
}

/// Serializable backend description, as found in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    HttpChat {
        endpoint: String,
        model: String,
        #[serde(default)]
        token_env: Option<String>,
        #[serde(default)]
        temperature: f64,
    },
    Scripted {
        transcript: PathBuf,
    },
}

impl BackendSpec {
    pub fn build(&self) -> std::io::Result<Box<dyn LlmBackend>> {
        Ok(match self {
            BackendSpec::HttpChat { endpoint, model, token_env, temperature } => {
                Box::new(HttpChatBackend::new(endpoint, model, token_env.clone()).with_temperature(*temperature))
            }
            BackendSpec::Scripted { transcript } => {
                let name = transcript.file_stem().map_or("scripted".into(), |s| s.to_string_lossy().into_owned());
                Box::new(ScriptedBackend::from_file(name, transcript)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_replays_then_exhausts() {
        let b = ScriptedBackend::new("t", vec!["a".into(), "b".into()]);
        assert_eq!(b.complete(&[]).unwrap(), "a");
        assert_eq!(b.complete(&[]).unwrap(), "b");
        assert_eq!(b.complete(&[]), Err(BackendError::TranscriptExhausted { backend: "t".into(), calls: 2 }));
        assert_eq!(b.remaining(), 0);
    }

    #[test]
    fn unreachable_endpoint_is_retryable() {
        let b = HttpChatBackend::new("http://127.0.0.1:9/v1/chat/completions", "m", None);
        match b.complete(&[ChatMessage::user("hi")]) {
            Err(BackendError::Unavailable { retryable, .. }) => assert!(retryable),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_json_shape() {
        let s: BackendSpec = serde_json::from_str(r#"{"kind":"http-chat","endpoint":"http://x","model":"m"}"#).unwrap();
        assert!(matches!(s, BackendSpec::HttpChat { temperature, .. } if temperature == 0.0));
        let s: BackendSpec = serde_json::from_str(r#"{"kind":"scripted","transcript":"t.json"}"#).unwrap();
        assert_eq!(s, BackendSpec::Scripted { transcript: "t.json".into() });
    }
}

//! Chat-completion backends.
//!
//! Everything that talks to a model goes through [`ChatBackend`]. The HTTP
//! implementation speaks the OpenAI chat-completions protocol; the mocks are
//! deterministic and never touch the network.

mod config;
mod guard;
mod http;
mod language;
mod limiter;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{BackendConfig, ConfigError};
pub use guard::{corrective_line, guarded_translate, language_name, GuardedOutcome, GUARD_EXTRA_ATTEMPTS};
pub use http::HttpBackend;
pub use language::{detect_language, LanguageDetector, LanguageGuess, LanguageLabel};
pub use mock::{payload_lines, source_text, MockBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// What a request is for. Selects the sampling temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Translation,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResult {
    pub text: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    /// Transport attempts spent on this call, including the successful one.
    pub attempts: u32,
    pub raw_finish_reason: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    HttpError { status: u16, attempts: u32, body: String },
    #[error("could not reach the endpoint after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unparseable response: {0}")]
    ProtocolError(String),
    #[error("authentication rejected (HTTP {status})")]
    AuthError { status: u16 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Transport attempts made before giving up, when known.
    pub fn attempts(&self) -> u32 {
        match self {
            BackendError::Timeout { attempts }
            | BackendError::HttpError { attempts, .. }
            | BackendError::Transport { attempts, .. } => *attempts,
            BackendError::AuthError { .. } | BackendError::ProtocolError(_) => 1,
            BackendError::InvalidRequest(_) => 0,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], purpose: Purpose) -> Result<BackendResult, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage], purpose: Purpose) -> Result<BackendResult, BackendError> {
        (**self).complete(messages, purpose)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, messages: &[ChatMessage], purpose: Purpose) -> Result<BackendResult, BackendError> {
        (**self).complete(messages, purpose)
    }
}

pub(crate) fn validate_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    match messages.first() {
        None => Err(BackendError::InvalidRequest("no messages".into())),
        Some(m) if m.role != Role::System => Err(BackendError::InvalidRequest(
            "the first message must have the system role".into(),
        )),
        Some(_) => Ok(()),
    }
}

/// Hex SHA-256 over the role/content sequence. Used to key canned responses.
pub fn prompt_hash(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        hasher.update(role.as_bytes());
        hasher.update([0u8]);
        hasher.update(m.content.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

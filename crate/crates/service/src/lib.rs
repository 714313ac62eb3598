//! Live bilingual support sessions.
//!
//! A customer and an agent post messages in their own languages; each
//! message is translated for the other side with the same context policy as
//! the batch pipeline. Sessions persist as append-only event logs and are
//! rebuilt from them on startup.

pub mod api;
pub mod events;
pub mod manager;
pub mod store;

use chatmt_core::backend::BackendError;
use chatmt_core::prompting::PromptError;
use thiserror::Error;

pub use api::{router, serve};
pub use events::{replay, EventKind, SessionEvent, SessionState, Turn, TurnStatus};
pub use manager::{ManagerConfig, SessionManager, TurnOutcome};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unsupported language pair customer={customer} agent={agent}; expected ko and en, one each")]
    BadLanguagePair { customer: String, agent: String },
    #[error("no session {0}")]
    SessionNotFound(String),
    #[error("message text is empty")]
    EmptyMessage,
    #[error("session {session_id} has no turn {turn_index}")]
    TurnNotFound { session_id: String, turn_index: usize },
    #[error("turn {turn_index} is {status:?}; only failed turns can be retried")]
    TurnNotRetryable { turn_index: usize, status: TurnStatus },
    #[error("translation of turn {} failed: {source}", turn.index)]
    TranslationFailed {
        turn: Box<Turn>,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BadLanguagePair { .. } => "bad_language_pair",
            ServiceError::SessionNotFound(_) => "session_not_found",
            ServiceError::EmptyMessage => "empty_message",
            ServiceError::TurnNotFound { .. } => "turn_not_found",
            ServiceError::TurnNotRetryable { .. } => "turn_not_retryable",
            ServiceError::TranslationFailed { .. } => "translation_failed",
            ServiceError::Prompt(_) => "prompt",
            ServiceError::CorruptLog(_) => "corrupt_log",
            ServiceError::Storage(_) => "storage",
            ServiceError::Internal(_) => "internal",
        }
    }
}

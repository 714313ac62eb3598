use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chatmt_core::backend::{BackendError, ChatBackend, ChatMessage, MockBackend, Purpose};
use chatmt_core::context::SummaryMode;
use chatmt_service::{ManagerConfig, SessionManager};

/// The pseudo translator, failing translations while `down` is set or when
/// the source contains `!fail`.
pub fn flaky_backend(down: Arc<AtomicBool>) -> MockBackend {
    let inner = MockBackend::pseudo();
    MockBackend::from_fn(move |messages: &[ChatMessage], purpose| {
        let failing = down.load(Ordering::SeqCst)
            || (purpose == Purpose::Translation && messages.iter().any(|m| m.content.contains("Source: !fail")));
        if failing {
            return Err(BackendError::HttpError { status: 503, attempts: 4, body: "unavailable".into() });
        }
        inner.complete(messages, purpose).map(|r| r.text)
    })
}

pub fn manager(dir: &std::path::Path, backend: Arc<dyn ChatBackend>) -> SessionManager {
    SessionManager::open(dir, backend, ManagerConfig { summary_mode: SummaryMode::Incremental, ..Default::default() }).unwrap()
}

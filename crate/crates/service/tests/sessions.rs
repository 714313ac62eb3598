mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chatmt_core::backend::{ChatBackend, MockBackend, Role};
use chatmt_core::context::SUMMARY_SYSTEM;
use chatmt_core::corpus::Sender;
use chatmt_service::store::{log_path, read_log};
use chatmt_service::{replay, ServiceError, SessionManager, TurnStatus};

use common::{flaky_backend, manager};

fn pseudo_manager(dir: &std::path::Path) -> (SessionManager, Arc<MockBackend>) {
    let backend = Arc::new(MockBackend::pseudo());
    (manager(dir, backend.clone()), backend)
}

#[test]
fn create_validates_language_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = pseudo_manager(dir.path());
    let a = m.create_session("en", "ko").unwrap();
    let b = m.create_session("ko", "en").unwrap();
    assert_ne!(a, b);
    assert!(m.get_session(&a).unwrap().turns.is_empty());
    for (c, g) in [("ko", "ko"), ("en", "de"), ("", "ko")] {
        assert!(matches!(m.create_session(c, g), Err(ServiceError::BadLanguagePair { .. })), "{c}/{g}");
    }
}

#[test]
fn unknown_session_and_empty_text() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = pseudo_manager(dir.path());
    assert!(matches!(m.get_session("nope"), Err(ServiceError::SessionNotFound(_))));
    let id = m.create_session("ko", "en").unwrap();
    assert!(matches!(m.post_message(&id, Sender::Agent, "   "), Err(ServiceError::EmptyMessage)));
}

#[test]
fn example_flow_puts_both_agent_turns_in_history() {
    let dir = tempfile::tempdir().unwrap();
    let (m, backend) = pseudo_manager(dir.path());
    let id = m.create_session("ko", "en").unwrap();

    let first = m.post_message(&id, Sender::Agent, "As I understand you are unable to login to your account as it asks you to reset the password and you are not getting reset password email.").unwrap();
    let prompt = &backend.calls()[0][1].content;
    assert!(!prompt.contains("Dialogue Context:"));
    assert!(!prompt.contains("agent: ") && !prompt.contains("customer: "));
    assert!(prompt.contains("from English to Korean."));
    assert_eq!(first.turn.status, TurnStatus::Translated);

    m.post_message(&id, Sender::Agent, "Am I correct?").unwrap();
    let third = m.post_message(&id, Sender::Customer, "비밀번호 재설정 메일이 도착하지 않습니다.").unwrap();
    let calls = backend.calls();
    let prompt = &calls.last().unwrap()[1].content;
    assert!(prompt.contains("from Korean to English."));
    let i_first = prompt.find("agent: As I understand").unwrap();
    let i_second = prompt.find("agent: Am I correct?").unwrap();
    let i_source = prompt.find("Source: 비밀번호").unwrap();
    assert!(i_first < i_second && i_second < i_source);
    assert_eq!(third.turn.translation.as_deref(), Some("translation of 23 characters"));
    assert_eq!(third.turn.prompt.as_ref().unwrap().history.len(), 2);
    assert!(third.summary_after.is_empty());
}

#[test]
fn sixth_message_sees_three_summarized_turns() {
    let dir = tempfile::tempdir().unwrap();
    let (m, backend) = pseudo_manager(dir.path());
    let id = m.create_session("ko", "en").unwrap();
    let mut last = None;
    for i in 0..6 {
        let sender = if i % 2 == 0 { Sender::Customer } else { Sender::Agent };
        let text = if sender == Sender::Customer { format!("질문 {i}") } else { format!("answer {i}") };
        last = Some(m.post_message(&id, sender, &text).unwrap());
    }
    let last = last.unwrap();
    assert_eq!(last.summary_after.covered_turns, 3);
    let prompt = last.turn.prompt.unwrap();
    assert_eq!(prompt.history.iter().map(|h| h.original.as_str()).collect::<Vec<_>>(), ["answer 3", "질문 4"]);
    assert!(prompt.instruction.lines().last().unwrap().starts_with("Dialogue Context: "));
    // one incremental update per eviction: turns 0, 1, 2
    let summary_calls = backend.calls().iter().filter(|c| c[0].content == SUMMARY_SYSTEM).count();
    assert_eq!(summary_calls, 3);
    let state = m.get_session(&id).unwrap();
    assert_eq!(state.turns.len(), 6);
    assert_eq!(state.history_window(), vec![4, 5]);
}

#[test]
fn failed_turn_is_stored_and_retryable() {
    let dir = tempfile::tempdir().unwrap();
    let down = Arc::new(AtomicBool::new(false));
    let m = manager(dir.path(), Arc::new(flaky_backend(down.clone())));
    let id = m.create_session("en", "ko").unwrap();
    m.post_message(&id, Sender::Customer, "Hello there").unwrap();

    down.store(true, Ordering::SeqCst);
    let err = m.post_message(&id, Sender::Agent, "안녕하세요").unwrap_err();
    let ServiceError::TranslationFailed { turn, .. } = err else { panic!("{err}") };
    assert_eq!(turn.status, TurnStatus::Failed);
    assert!(turn.error.as_deref().unwrap().contains("503"));
    assert!(matches!(m.retry_turn(&id, 0), Err(ServiceError::TurnNotRetryable { .. })));
    assert!(matches!(m.retry_turn(&id, 9), Err(ServiceError::TurnNotFound { .. })));
    assert!(m.retry_turn(&id, 1).is_err());

    down.store(false, Ordering::SeqCst);
    let retried = m.retry_turn(&id, 1).unwrap();
    assert_eq!(retried.turn.status, TurnStatus::Translated);
    assert_eq!(retried.turn.translation.as_deref(), Some("translation of 5 characters"));
    assert!(retried.turn.error.is_none());
}

#[test]
fn restart_rebuilds_identical_state() {
    let dir = tempfile::tempdir().unwrap();
    let backend: Arc<dyn ChatBackend> = Arc::new(MockBackend::pseudo());
    let (id, before) = {
        let m = manager(dir.path(), backend.clone());
        let id = m.create_session("ko", "en").unwrap();
        for (s, t) in [(Sender::Customer, "로그인이 안 돼요"), (Sender::Agent, "Which account?"), (Sender::Customer, "NAME-1 계정이요")] {
            m.post_message(&id, s, t).unwrap();
        }
        (id.clone(), m.get_session(&id).unwrap())
    };
    let events = read_log(&log_path(dir.path(), &id)).unwrap();
    assert_eq!(events.iter().map(|e| e.sequence).collect::<Vec<_>>(), (1..=events.len() as u64).collect::<Vec<_>>());
    assert_eq!(replay(&events).unwrap(), before);

    let counting = Arc::new(MockBackend::pseudo());
    let reopened = manager(dir.path(), counting.clone());
    assert_eq!(reopened.get_session(&id).unwrap(), before);
    assert_eq!(counting.call_count(), 0);
    // the reopened log keeps appending densely
    reopened.post_message(&id, Sender::Agent, "Thanks").unwrap();
    let events = read_log(&log_path(dir.path(), &id)).unwrap();
    assert_eq!(replay(&events).unwrap(), reopened.get_session(&id).unwrap());
}

#[test]
fn prompts_start_with_system_message() {
    let dir = tempfile::tempdir().unwrap();
    let (m, backend) = pseudo_manager(dir.path());
    let id = m.create_session("ko", "en").unwrap();
    m.post_message(&id, Sender::Customer, "안녕하세요").unwrap();
    let call = &backend.calls()[0];
    assert_eq!(call[0].role, Role::System);
    assert_eq!(call[0].content, "You are a professional translator fluent in both Korean and English.");
}

//! HTTP routes and the event stream.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chatmt_core::corpus::Sender;
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;
use tower_http::cors::CorsLayer;

use crate::events::{SessionEvent, SessionState};
use crate::manager::{SessionManager, TurnOutcome};
use crate::ServiceError;

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub customer_language: String,
    pub agent_language: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

#[derive(Debug, Deserialize)]
pub struct PostMessage {
    pub sender: Sender,
    pub text: String,
}

/// `GET /sessions/{id}` body: the state plus the turns the next message
/// will see verbatim.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub state: SessionState,
    pub history_window: Vec<usize>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadLanguagePair { .. } | ServiceError::EmptyMessage | ServiceError::Prompt(_) => StatusCode::BAD_REQUEST,
            ServiceError::SessionNotFound(_) | ServiceError::TurnNotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::TurnNotRetryable { .. } => StatusCode::CONFLICT,
            ServiceError::TranslationFailed { .. } => StatusCode::BAD_GATEWAY,
            ServiceError::CorruptLog(_) | ServiceError::Storage(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let ServiceError::TranslationFailed { turn, .. } = &self {
            body["turn"] = serde_json::to_value(turn).unwrap_or_default();
        }
        (status, Json(body)).into_response()
    }
}

type AppState = Arc<SessionManager>;

async fn blocking<T, F>(manager: AppState, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&SessionManager) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&manager)).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(State(manager): State<AppState>, Json(body): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ServiceError> {
    let session_id = blocking(manager, move |m| m.create_session(&body.customer_language, &body.agent_language)).await?;
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

async fn post_message(
    State(manager): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<PostMessage>,
) -> Result<Json<TurnOutcome>, ServiceError> {
    Ok(Json(blocking(manager, move |m| m.post_message(&id, body.sender, &body.text)).await?))
}

async fn get_session(State(manager): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let state = blocking(manager, move |m| m.get_session(&id)).await?;
    let history_window = state.history_window();
    Ok(Json(SessionView { state, history_window }))
}

async fn retry_turn(State(manager): State<AppState>, Path((id, n)): Path<(String, usize)>) -> Result<Json<TurnOutcome>, ServiceError> {
    Ok(Json(blocking(manager, move |m| m.retry_turn(&id, n)).await?))
}

fn sse_event(event: &SessionEvent) -> Event {
    Event::default()
        .id(event.sequence.to_string())
        .event(event.kind.name())
        .data(serde_json::to_string(event).unwrap_or_default())
}

/// Past events of the session, then live ones as they happen.
async fn session_events(
    State(manager): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ServiceError> {
    let rx = manager.subscribe();
    let backlog = manager.events(&id)?;
    let last = backlog.last().map_or(0, |e| e.sequence);
    let past = stream::iter(backlog.into_iter().map(|e| Ok(sse_event(&e))));
    let live = stream::unfold((rx, id, last), |(mut rx, id, last)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if e.session_id == id && e.sequence > last => {
                    let seq = e.sequence;
                    return Some((Ok(sse_event(&e)), (rx, id, seq)));
                }
                Ok(_) => continue,
                Err(broadcast::error::RecvError::Lagged(skipped)) => {
                    tracing::warn!(session = %id, skipped, "event stream lagged; client should reload state");
                    let notice = Event::default().event("lagged").data(skipped.to_string());
                    return Some((Ok(notice), (rx, id, last)));
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(past.chain(live)).keep_alive(KeepAlive::default()))
}

async fn health() -> &'static str {
    "ok"
}

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/turns/{n}/retry", post(retry_turn))
        .route("/sessions/{id}/events", get(session_events))
        .layer(CorsLayer::permissive())
        .with_state(manager)
}

pub async fn serve(manager: Arc<SessionManager>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(manager)).await
}

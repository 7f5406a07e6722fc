//! HTTP endpoints of `agentd`.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio_stream::wrappers::UnboundedReceiverStream;
use tokio_stream::StreamExt;

use crate::gateway::{Gateway, GatewayError, RejectCode};

pub const TOKEN_HEADER: &str = "x-agent-token";

type Shared = Arc<Gateway>;

pub fn router(gateway: Shared) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/history", get(history))
        .route("/v1/executions/{id}/telemetry", get(telemetry))
        .route("/v1/status", get(status))
        .with_state(gateway)
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            GatewayError::Rejected { code: RejectCode::NotFound, .. } => (StatusCode::NOT_FOUND, "not_found"),
            GatewayError::Rejected { code: RejectCode::Unauthorized, .. } => (StatusCode::UNAUTHORIZED, "unauthorized"),
            GatewayError::Rejected { code: RejectCode::Forbidden, .. } => (StatusCode::FORBIDDEN, "forbidden"),
            GatewayError::SessionNotFound(_) | GatewayError::ExecutionNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            GatewayError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            GatewayError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            GatewayError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let message = match &self {
            GatewayError::Rejected { message, .. } => message.clone(),
            other => other.to_string(),
        };
        (status, Json(json!({"error": {"code": code, "message": message}}))).into_response()
    }
}

fn token(headers: &HeaderMap) -> &str {
    headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()).unwrap_or_default()
}

#[derive(Deserialize)]
struct CreateSession {
    user_id: String,
    agent_id: String,
}

async fn create_session(
    State(gateway): State<Shared>,
    headers: HeaderMap,
    Json(body): Json<CreateSession>,
) -> Result<Response, GatewayError> {
    let state = gateway.create_session(&body.user_id, &body.agent_id, token(&headers))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": state.session_id,
            "user_id": state.user_id,
            "agent_id": state.agent_id,
            "status": state.status,
            "created_at": state.created_at,
        })),
    )
        .into_response())
}

#[derive(Deserialize)]
struct PostMessage {
    content: String,
}

async fn post_message(
    State(gateway): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<PostMessage>,
) -> Result<Response, GatewayError> {
    let events = gateway.post_message(&id, token(&headers), &body.content)?;
    let stream = UnboundedReceiverStream::new(events).map(|r| Ok::<_, Infallible>(Bytes::from(r.to_wire())));
    Ok((
        [(header::CONTENT_TYPE, "text/event-stream"), (header::CACHE_CONTROL, "no-cache")],
        Body::from_stream(stream),
    )
        .into_response())
}

#[derive(Deserialize)]
struct HistoryQuery {
    up_to: Option<u64>,
}

async fn history(
    State(gateway): State<Shared>,
    Path(id): Path<String>,
    Query(query): Query<HistoryQuery>,
    headers: HeaderMap,
) -> Result<Response, GatewayError> {
    let entries = gateway.history(&id, token(&headers), query.up_to)?;
    Ok(Json(entries).into_response())
}

async fn telemetry(
    State(gateway): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, GatewayError> {
    let line = gateway.telemetry(&id, token(&headers))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], line).into_response())
}

async fn status(State(gateway): State<Shared>) -> Response {
    Json(gateway.status()).into_response()
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    gateway: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway)).with_graceful_shutdown(shutdown).await
}

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use oppa_core::domain::DialogueAct;
use oppa_core::play::{ActOutcome, CreateSession, PlayError, PlayService, SessionView};
use serde_json::json;
use tower_http::cors::CorsLayer;

pub struct ApiError(PlayError);

impl From<PlayError> for ApiError {
    fn from(e: PlayError) -> Self {
        Self(e)
    }
}

pub fn status_of(e: &PlayError) -> StatusCode {
    match e {
        PlayError::UnknownSession(_) | PlayError::UnknownCheckpoint(_) => StatusCode::NOT_FOUND,
        PlayError::NotYourTurn | PlayError::Finished => StatusCode::CONFLICT,
        PlayError::IllegalAct(_) => StatusCode::UNPROCESSABLE_ENTITY,
        PlayError::BadRequest(_) => StatusCode::BAD_REQUEST,
        PlayError::Agent(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn code_of(e: &PlayError) -> &'static str {
    match e {
        PlayError::UnknownSession(_) => "unknown_session",
        PlayError::UnknownCheckpoint(_) => "unknown_checkpoint",
        PlayError::NotYourTurn => "not_your_turn",
        PlayError::Finished => "finished",
        PlayError::IllegalAct(_) => "illegal_act",
        PlayError::BadRequest(_) => "bad_request",
        PlayError::Agent(_) => "agent_failure",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": code_of(&self.0), "message": self.0.to_string() });
        (status_of(&self.0), Json(body)).into_response()
    }
}

type Shared = Arc<PlayService>;

async fn create(
    State(svc): State<Shared>,
    Json(req): Json<CreateSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    Ok((StatusCode::CREATED, Json(svc.create_session(&req)?)))
}

async fn post_act(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Json(act): Json<DialogueAct>,
) -> Result<Json<ActOutcome>, ApiError> {
    Ok(Json(svc.post_act(&id, &act)?))
}

async fn get_state(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    Ok(Json(svc.get_state(&id)?))
}

async fn list_actions(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<Vec<DialogueAct>>, ApiError> {
    Ok(Json(svc.list_actions(&id)?))
}

async fn healthz(State(svc): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "checkpoints": svc.checkpoints(), "sessions": svc.session_count() }))
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/acts", post(post_act))
        .route("/sessions/{id}/actions", get(list_actions))
        .layer(CorsLayer::permissive())
        .with_state(service)
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use meddm_core::engine::EngineError;
use serde_json::json;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_BODY", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UNKNOWN_SESSION", format!("no session `{id}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (status, code) = match &e {
            EngineError::EmptyKb => (StatusCode::SERVICE_UNAVAILABLE, "EMPTY_KB"),
            EngineError::UnknownTree(_) => (StatusCode::NOT_FOUND, "UNKNOWN_TREE"),
            EngineError::EmptyComplaint => (StatusCode::UNPROCESSABLE_ENTITY, "EMPTY_COMPLAINT"),
            EngineError::WrongState(_) => (StatusCode::CONFLICT, "WRONG_STATE"),
            EngineError::UnknownNode(_) | EngineError::Tree(_) | EngineError::Ieet(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use idtrace_core::{TraceError, UniverseError};
use serde::{Deserialize, Serialize};

/// An error with a machine-readable code and the HTTP status it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

/// Wire form: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn dataset_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "dataset_not_found",
            format!("no dataset `{id}`"),
        )
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "session_not_found",
            format!("no session `{id}`"),
        )
    }

    pub fn revision_conflict(expected: u64, actual: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "revision_conflict",
            format!("expected revision {expected} but the session is at {actual}"),
        )
    }

    pub fn invalid_csv(err: UniverseError) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_csv",
            err.to_string(),
        )
    }

    pub fn invalid_observation(message: impl Into<String>) -> Self {
        Self::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_observation",
            message,
        )
    }

    pub fn storage(err: impl std::fmt::Display) -> Self {
        Self::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "storage_error",
            err.to_string(),
        )
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: ErrorDetail {
                code: self.code.to_string(),
                message: self.message.clone(),
            },
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<TraceError> for ApiError {
    fn from(err: TraceError) -> Self {
        match err {
            TraceError::NotActive(_) | TraceError::Exhausted => {
                Self::new(StatusCode::CONFLICT, "session_not_active", err.to_string())
            }
            TraceError::AlreadyAcquired(_) | TraceError::DuplicateKnown(_) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "duplicate_attribute",
                err.to_string(),
            ),
            TraceError::InvalidObservation(_) => Self::invalid_observation(err.to_string()),
            TraceError::TargetExcluded(_) | TraceError::UnknownObject(_) => {
                Self::bad_request(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(err: std::io::Error) -> Self {
        Self::storage(err)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use eod_core::{BadParam, CompareError, ValidationErrors};
use serde_json::json;
use thiserror::Error;
use tracing::error;

use crate::store::StoreError;

/// Every failure a handler can report, with its HTTP status.
///
/// Missing, pending and rejected records all surface as [`ApiError::NotFound`]
/// with the same body, so anonymous callers cannot tell them apart.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("ValidationFailed: {0}")]
    Validation(ValidationErrors),
    #[error("{0}")]
    BadParam(BadParam),
    #[error("{0}")]
    Compare(CompareError),
    #[error("BadRequest: {0}")]
    BadRequest(String),
    #[error("Unauthorized: a valid moderator token is required")]
    Unauthorized,
    #[error("NotFound: no such dataset")]
    NotFound,
    #[error("Conflict: {0}")]
    Conflict(String),
    #[error("PayloadTooLarge: request body exceeds {limit} bytes")]
    PayloadTooLarge { limit: usize },
    #[error("RateLimited: too many submissions, retry in {retry_after_secs}s")]
    RateLimited { retry_after_secs: u64 },
    #[error("Internal: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Validation(_) | ApiError::BadParam(_) | ApiError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::Compare(CompareError::TooFewIds | CompareError::DuplicateId(_)) => {
                StatusCode::BAD_REQUEST
            }
            ApiError::Compare(CompareError::UnknownId(_) | CompareError::NotPublic(_)) => {
                StatusCode::NOT_FOUND
            }
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::NotFound => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::PayloadTooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::RateLimited { .. } => StatusCode::TOO_MANY_REQUESTS,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Machine-readable error name used in response bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Validation(_) => "ValidationFailed",
            ApiError::BadParam(_) => "BadParam",
            ApiError::Compare(CompareError::TooFewIds) => "TooFewIds",
            ApiError::Compare(CompareError::DuplicateId(_)) => "DuplicateId",
            ApiError::Compare(_) | ApiError::NotFound => "NotFound",
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::Unauthorized => "Unauthorized",
            ApiError::Conflict(_) => "Conflict",
            ApiError::PayloadTooLarge { .. } => "PayloadTooLarge",
            ApiError::RateLimited { .. } => "RateLimited",
            ApiError::Internal(_) => "Internal",
        }
    }
}

impl From<ValidationErrors> for ApiError {
    fn from(e: ValidationErrors) -> Self {
        ApiError::Validation(e)
    }
}

impl From<BadParam> for ApiError {
    fn from(e: BadParam) -> Self {
        ApiError::BadParam(e)
    }
}

impl From<CompareError> for ApiError {
    fn from(e: CompareError) -> Self {
        ApiError::Compare(e)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownId(_) | StoreError::UnknownSlug(_) | StoreError::NotPublic(_) => {
                ApiError::NotFound
            }
            StoreError::InvalidTransition { .. } | StoreError::NonEmptyStore(_) => {
                ApiError::Conflict(e.to_string())
            }
            StoreError::Snapshot(_) => ApiError::BadRequest(e.to_string()),
            StoreError::Storage(_) | StoreError::Corrupt(_) | StoreError::Locked(_) => {
                ApiError::Internal(e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let body = match &self {
            ApiError::Validation(errors) => json!({
                "error": self.code(),
                "message": self.to_string(),
                "fields": errors.0,
            }),
            ApiError::BadParam(bad) => json!({
                "error": self.code(),
                "message": self.to_string(),
                "params": bad.0,
            }),
            ApiError::Compare(CompareError::UnknownId(_) | CompareError::NotPublic(_)) => json!({
                "error": self.code(),
                "message": ApiError::NotFound.to_string(),
            }),
            ApiError::Internal(detail) => {
                error!(%detail, "request failed");
                json!({"error": self.code(), "message": "internal error"})
            }
            _ => json!({"error": self.code(), "message": self.to_string()}),
        };
        let mut response = (status, Json(body)).into_response();
        if let ApiError::RateLimited { retry_after_secs } = self {
            response
                .headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(retry_after_secs));
        }
        response
    }
}

use std::collections::BTreeMap;
use std::time::Duration;

use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::leaderboard::LeaderboardError;
use crate::query::export::ExportError;
use crate::query::InvalidQuery;
use crate::store::StoreError;
use crate::workspace::WorkspaceError;

/// Stable error codes. Each maps to exactly one HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidQuery,
    InvalidRequest,
    Unauthenticated,
    Forbidden,
    NotFound,
    Conflict,
    RateLimited,
    StoreUnavailable,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 8] = [
        ErrorCode::InvalidQuery,
        ErrorCode::InvalidRequest,
        ErrorCode::Unauthenticated,
        ErrorCode::Forbidden,
        ErrorCode::NotFound,
        ErrorCode::Conflict,
        ErrorCode::RateLimited,
        ErrorCode::StoreUnavailable,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::InvalidQuery => StatusCode::BAD_REQUEST,
            ErrorCode::InvalidRequest => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Unauthenticated => StatusCode::UNAUTHORIZED,
            ErrorCode::Forbidden => StatusCode::FORBIDDEN,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::RateLimited => StatusCode::TOO_MANY_REQUESTS,
            ErrorCode::StoreUnavailable => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_errors: Option<BTreeMap<String, String>>,
    #[serde(skip)]
    pub retry_after: Option<Duration>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            status: code.status().as_u16(),
            code,
            message: message.into(),
            field_errors: None,
            retry_after: None,
        }
    }

    pub fn not_found(what: impl std::fmt::Display) -> Self {
        ApiError::new(ErrorCode::NotFound, format!("{what} not found"))
    }

    pub fn invalid_request(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::InvalidRequest, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.code.status();
        let retry = self.retry_after;
        let mut resp = (status, Json(self)).into_response();
        if let Some(d) = retry {
            let secs = d.as_secs() + u64::from(d.subsec_nanos() > 0);
            if let Ok(v) = HeaderValue::from_str(&secs.max(1).to_string()) {
                resp.headers_mut().insert(header::RETRY_AFTER, v);
            }
        }
        resp
    }
}

impl From<InvalidQuery> for ApiError {
    fn from(e: InvalidQuery) -> Self {
        let mut out = ApiError::new(ErrorCode::InvalidQuery, e.to_string());
        out.field_errors = Some(e.field_errors);
        out
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "store error");
        ApiError::new(ErrorCode::StoreUnavailable, e.to_string())
    }
}

impl From<LeaderboardError> for ApiError {
    fn from(e: LeaderboardError) -> Self {
        let LeaderboardError::MissingFilters(fields) = &e;
        let mut q = InvalidQuery::default();
        for f in fields {
            q.add(f, "required");
        }
        let mut out = ApiError::from(q);
        out.message = e.to_string();
        out
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::InvalidQuery(q) => q.into(),
            other => {
                let mut q = InvalidQuery::default();
                q.add("format", &other.to_string());
                q.into()
            }
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        let code = match &e {
            WorkspaceError::InvalidCriteria(q) => return q.clone().into(),
            WorkspaceError::Store(_) => ErrorCode::StoreUnavailable,
            WorkspaceError::InvalidEmail(_)
            | WorkspaceError::WeakSecret
            | WorkspaceError::EmptyTitle => ErrorCode::InvalidRequest,
            WorkspaceError::DuplicateEmail | WorkspaceError::DuplicateTitle(_) => {
                ErrorCode::Conflict
            }
            WorkspaceError::InvalidCredentials | WorkspaceError::Unauthenticated => {
                ErrorCode::Unauthenticated
            }
            WorkspaceError::NotFound(_) => ErrorCode::NotFound,
            WorkspaceError::Forbidden => ErrorCode::Forbidden,
        };
        ApiError::new(code, e.to_string())
    }
}

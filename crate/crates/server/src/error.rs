use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use funnel_core::docqa::DocQaError;
use funnel_core::embed::EmbedError;
use funnel_core::engine::SearchError;
use funnel_core::expansion::ExpansionError;
use funnel_core::index::IndexError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    Conflict,
    UpstreamFailure,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::UpstreamFailure => StatusCode::BAD_GATEWAY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), detail: None }
    }

    pub fn with_detail(mut self, detail: impl ToString) -> Self {
        self.detail = Some(detail.to_string());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<ExpansionError> for ApiError {
    fn from(e: ExpansionError) -> Self {
        match e {
            ExpansionError::EmptyQuery => ApiError::bad_request("query is empty"),
            ExpansionError::Tagger(_) | ExpansionError::InvalidMention(_) | ExpansionError::UnknownConcept(_) => {
                ApiError::new(ErrorCode::UpstreamFailure, "entity tagging failed").with_detail(e)
            }
            other => ApiError::internal("expansion failed").with_detail(other),
        }
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Expansion(e) => e.into(),
            SearchError::InvalidPlan(e) | SearchError::Index(IndexError::Plan(e)) => {
                ApiError::bad_request("invalid clause tree").with_detail(e)
            }
            SearchError::Index(IndexError::ZeroDepth) => ApiError::bad_request("k must be at least 1"),
            SearchError::Index(other) => ApiError::internal("retrieval failed").with_detail(other),
        }
    }
}

impl From<EmbedError> for ApiError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Config(_) => ApiError::internal("embedder misconfigured").with_detail(e),
            _ => ApiError::new(ErrorCode::UpstreamFailure, "embedding service failed").with_detail(e),
        }
    }
}

impl From<DocQaError> for ApiError {
    fn from(e: DocQaError) -> Self {
        match e {
            DocQaError::EmbeddingFailure(e) => e.into(),
            DocQaError::ScorerFailure(_) => ApiError::new(ErrorCode::UpstreamFailure, "pair scorer failed").with_detail(e),
            DocQaError::EmptyQuestion => ApiError::bad_request("question is empty"),
            DocQaError::Config(_) => ApiError::internal("question answering misconfigured").with_detail(e),
        }
    }
}

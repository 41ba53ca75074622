use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("topic {0:?} not found")]
    TopicNotFound(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0}")]
    Conflict(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(strata_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<strata_core::Error> for ServiceError {
    fn from(e: strata_core::Error) -> Self {
        match e {
            strata_core::Error::InvalidInput(m) => Self::InvalidInput(m),
            strata_core::Error::Config(m) => Self::Config(m),
            other => Self::Core(other),
        }
    }
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::TopicNotFound(_) => StatusCode::NOT_FOUND,
            Self::Core(strata_core::Error::NodeNotFound(_)) => StatusCode::NOT_FOUND,
            Self::InvalidInput(_) | Self::Config(_) => StatusCode::BAD_REQUEST,
            Self::Conflict(_) => StatusCode::CONFLICT,
            Self::Core(_) | Self::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

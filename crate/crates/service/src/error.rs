use meshnote_core::annotation::FieldViolation;
use meshnote_core::{AnnotationError, DetectError, MeshError, SelectionError};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

/// A problem with one document of an import batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentViolation {
    /// Position in the submitted array.
    pub document: usize,
    /// Annotation id as submitted, when readable.
    pub id: Option<String>,
    pub path: String,
    pub rule: String,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown annotation `{0}`")]
    UnknownAnnotation(String),
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("no endpoint at `{0}`")]
    NoRoute(String),
    #[error("cannot parse mesh: {0}")]
    Parse(#[source] MeshError),
    #[error("invalid gesture: {0}")]
    InvalidGesture(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("fields violate schema")]
    SchemaViolation(Vec<FieldViolation>),
    #[error("invalid annotation: {0}")]
    Annotation(#[source] AnnotationError),
    #[error("{} document(s) failed validation", .0.len())]
    Validation(Vec<DocumentViolation>),
    #[error("annotation ids already exist: {}", .0.join(", "))]
    IdConflict(Vec<String>),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Detect(DetectError),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store entry {path}: {message}")]
    Corrupt { path: String, message: String },
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownModel(_) => "UnknownModel",
            Self::UnknownAnnotation(_) => "UnknownAnnotation",
            Self::UnknownDetector(_) => "DetectorUnknown",
            Self::NoRoute(_) => "NotFound",
            Self::Parse(_) => "ParseError",
            Self::InvalidGesture(_) => "InvalidGesture",
            Self::BadRequest(_) => "BadRequest",
            Self::SchemaViolation(_) => "SchemaViolation",
            Self::Annotation(_) => "InvalidAnnotation",
            Self::Validation(_) => "ValidationError",
            Self::IdConflict(_) => "IdConflict",
            Self::Conflict(_) => "Conflict",
            Self::Detect(e) => match e {
                DetectError::DetectorUnreachable { .. } => "DetectorUnreachable",
                DetectError::DetectorTimeout { .. } => "DetectorTimeout",
                DetectError::ProtocolError { .. } => "ProtocolError",
                DetectError::DegenerateMesh => "DegenerateMesh",
                _ => "DetectorError",
            },
            Self::Io(_) => "StorageError",
            Self::Corrupt { .. } => "CorruptStore",
        }
    }

    /// HTTP status for the error.
    pub fn status(&self) -> u16 {
        match self {
            Self::UnknownModel(_)
            | Self::UnknownAnnotation(_)
            | Self::UnknownDetector(_)
            | Self::NoRoute(_) => 404,
            Self::InvalidGesture(_) | Self::BadRequest(_) => 400,
            Self::Parse(_) | Self::SchemaViolation(_) | Self::Annotation(_) | Self::Validation(_) => 422,
            Self::IdConflict(_) | Self::Conflict(_) => 409,
            Self::Detect(DetectError::DetectorUnreachable { .. }) => 502,
            Self::Detect(DetectError::DetectorTimeout { .. }) => 504,
            Self::Detect(_) => 422,
            Self::Io(_) | Self::Corrupt { .. } => 500,
        }
    }

    pub fn details(&self) -> Value {
        match self {
            Self::Parse(MeshError::Parse { line, message }) => json!({ "line": line, "reason": message }),
            Self::SchemaViolation(v) => json!(v),
            Self::Annotation(AnnotationError::Validation(v)) => json!(v),
            Self::Validation(v) => json!(v),
            Self::IdConflict(ids) => json!({ "ids": ids }),
            Self::Detect(DetectError::DetectorUnreachable { cause, .. }) => json!({ "cause": cause }),
            _ => Value::Null,
        }
    }

    /// The `{"error": {code, message, details}}` response document.
    pub fn to_json(&self) -> Value {
        json!({
            "error": {
                "code": self.code(),
                "message": self.to_string(),
                "details": self.details(),
            }
        })
    }
}

impl From<AnnotationError> for ServiceError {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::SchemaViolation(v) => Self::SchemaViolation(v),
            other => Self::Annotation(other),
        }
    }
}

impl From<SelectionError> for ServiceError {
    fn from(e: SelectionError) -> Self {
        Self::InvalidGesture(e.to_string())
    }
}

impl From<DetectError> for ServiceError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::DetectorUnknown(name) => Self::UnknownDetector(name),
            other => Self::Detect(other),
        }
    }
}

use thiserror::Error;

use crate::annotation::{FieldViolation, Violation};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    Index {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("{attribute} count {found} does not match vertex count {expected}")]
    AttributeCount {
        attribute: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("normal of vertex {vertex} is not unit length")]
    NonUnitNormal { vertex: usize },
    #[error("unsupported mesh format `{0}`")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MeshError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("invalid brush stroke: {0}")]
    InvalidStroke(String),
    #[error("invalid lasso polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("selection sets belong to different meshes (`{0}` vs `{1}`)")]
    MeshMismatch(String, String),
    #[error("face {face} is out of range for a mesh with {face_count} faces")]
    FaceOutOfRange { face: u32, face_count: usize },
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("fields violate schema: {}", format_field_violations(.0))]
    SchemaViolation(Vec<FieldViolation>),
    #[error("unknown mesh `{0}`")]
    UnknownMesh(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("document is not a valid web annotation: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unsupported selector type `{0}`")]
    SelectorUnsupported(String),
    #[error("malformed annotation body: {0}")]
    Body(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

fn format_field_violations(violations: &[FieldViolation]) -> String {
    violations
        .iter()
        .map(|v| format!("`{}` {}", v.key, v.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{}: {}", v.path, v.rule))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("unknown detector `{0}`")]
    DetectorUnknown(String),
    #[error("detector `{name}` unreachable: {cause}")]
    DetectorUnreachable { name: String, cause: String },
    #[error("detector `{name}` protocol error: {reason}")]
    ProtocolError { name: String, reason: String },
    #[error("detector `{name}` timed out after {seconds:.1} s")]
    DetectorTimeout { name: String, seconds: f64 },
    #[error("mesh has no extent (zero surface area)")]
    DegenerateMesh,
    #[error("heat map belongs to mesh `{heatmap}`, not `{mesh}`")]
    MeshMismatch { heatmap: String, mesh: String },
    #[error("heat map has {found} values but the mesh has {expected} vertices")]
    LengthMismatch { expected: usize, found: usize },
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("heat map is not normalized")]
    NotNormalized,
    #[error("at least one saliency scale is required")]
    NoScales,
    #[error("duplicate detector name `{0}`")]
    DuplicateDetector(String),
}

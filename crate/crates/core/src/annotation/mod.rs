//! Annotation records, field schemas and Web Annotation serialization.

mod body;
mod record;
mod schema;
mod wadm;

pub use body::{parse_body, write_body, Body};
pub use record::{
    create_annotation, derive_vertices, now, AnnotationEdit, AnnotationRecord, NewAnnotation, Rgb,
};
pub use schema::{
    FieldEntry, FieldKind, FieldSchema, FieldViolation, SchemaRef, SchemaRegistry, DEFAULT_SCHEMA,
};
pub use wadm::{
    format_timestamp, from_wadm, model_uri, to_canonical_string, to_wadm, validate_wadm, Violation,
    ANNO_CONTEXT, SELECTOR_TYPE,
};

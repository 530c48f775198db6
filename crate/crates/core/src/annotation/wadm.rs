//! Web Annotation (JSON-LD) documents.
//!
//! Members are emitted in a fixed order: `@context`, `id`, `type`,
//! `created`, `modified`, `creator`, `body`, `target`, then extensions in
//! their original order. The target selector is a `MeshFaceSelector`:
//!
//! ```json
//! { "type": "MeshFaceSelector", "faces": [0, 4, 5], "vertices": [0, 1, 2, 6] }
//! ```
//!
//! with both lists strictly increasing.

use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use uuid::Uuid;

use super::body::{parse_body, write_body, Body};
use super::{AnnotationRecord, SchemaRegistry};
use crate::error::AnnotationError;
use crate::selection::SelectionSet;

pub const ANNO_CONTEXT: &str = "http://www.w3.org/ns/anno.jsonld";
pub const SELECTOR_TYPE: &str = "MeshFaceSelector";
pub const BODY_FORMAT: &str = "application/xml";
pub const MODEL_URI_PREFIX: &str = "urn:model:";
const UUID_PREFIX: &str = "urn:uuid:";

const RESERVED: [&str; 8] = [
    "@context", "id", "type", "created", "modified", "creator", "body", "target",
];

/// One structural problem in a document.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    /// JSONPath of the offending member, e.g. `$.target.selector.faces`.
    pub path: String,
    pub rule: String,
}

impl Violation {
    fn new(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            rule: rule.into(),
        }
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc))
}

pub fn model_uri(mesh_id: &str) -> String {
    format!("{MODEL_URI_PREFIX}{mesh_id}")
}

fn mesh_id_from_uri(source: &str) -> &str {
    source.strip_prefix(MODEL_URI_PREFIX).unwrap_or(source)
}

pub fn to_wadm(record: &AnnotationRecord) -> Value {
    let body = Body {
        title: record.title.clone(),
        color: record.color,
        description: record.description.clone(),
        schema: record.schema.clone(),
        fields: record.fields.clone(),
    };
    let mut doc = Map::new();
    let context = record
        .extensions
        .get("@context")
        .cloned()
        .unwrap_or_else(|| Value::from(ANNO_CONTEXT));
    doc.insert("@context".into(), context);
    doc.insert("id".into(), Value::from(format!("{UUID_PREFIX}{}", record.id)));
    doc.insert("type".into(), Value::from("Annotation"));
    doc.insert("created".into(), Value::from(format_timestamp(&record.created_at)));
    doc.insert("modified".into(), Value::from(format_timestamp(&record.modified_at)));
    doc.insert("creator".into(), Value::from(record.creator.clone()));
    doc.insert(
        "body".into(),
        json!({
            "type": "TextualBody",
            "format": BODY_FORMAT,
            "value": write_body(&body),
        }),
    );
    doc.insert(
        "target".into(),
        json!({
            "source": model_uri(record.mesh_id()),
            "selector": {
                "type": SELECTOR_TYPE,
                "faces": record.roi.faces.iter().collect::<Vec<_>>(),
                "vertices": record.derived_vertices.iter().collect::<Vec<_>>(),
            },
        }),
    );
    for (k, v) in &record.extensions {
        if !RESERVED.contains(&k.as_str()) {
            doc.insert(k.clone(), v.clone());
        }
    }
    Value::Object(doc)
}

/// Canonical text form: two-space indentation, member order as emitted
/// by [`to_wadm`].
pub fn to_canonical_string(doc: &Value) -> String {
    serde_json::to_string_pretty(doc).expect("JSON values always serialize")
}

fn context_ok(v: &Value) -> bool {
    match v {
        Value::String(s) => s == ANNO_CONTEXT,
        Value::Array(items) => items.iter().any(|i| i == ANNO_CONTEXT),
        _ => false,
    }
}

fn index_list(
    v: Option<&Value>,
    path: &str,
    require_non_empty: bool,
    out: &mut Vec<Violation>,
) -> Option<Vec<u32>> {
    let Some(v) = v else {
        out.push(Violation::new(path, "is required"));
        return None;
    };
    let Some(items) = v.as_array() else {
        out.push(Violation::new(path, "must be an array of indices"));
        return None;
    };
    let mut result = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        match item.as_u64().and_then(|n| u32::try_from(n).ok()) {
            Some(n) => result.push(n),
            None => {
                out.push(Violation::new(
                    format!("{path}[{i}]"),
                    "must be a non-negative 32-bit integer",
                ));
                ok = false;
            }
        }
    }
    if require_non_empty && items.is_empty() {
        out.push(Violation::new(path, "must not be empty"));
        ok = false;
    }
    let mut seen = HashSet::with_capacity(result.len());
    if !result.iter().all(|n| seen.insert(*n)) {
        out.push(Violation::new(path, "must not contain duplicates"));
        ok = false;
    }
    ok.then_some(result)
}

fn expect_str<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    path: &str,
    out: &mut Vec<Violation>,
) -> Option<&'a str> {
    match obj.get(key) {
        None => {
            out.push(Violation::new(path, "is required"));
            None
        }
        Some(Value::String(s)) => Some(s),
        Some(_) => {
            out.push(Violation::new(path, "must be a string"));
            None
        }
    }
}

fn expect_object<'a>(
    v: Option<&'a Value>,
    path: &str,
    what: &str,
    out: &mut Vec<Violation>,
) -> Option<&'a Map<String, Value>> {
    match v {
        None => {
            out.push(Violation::new(path, "is required"));
            None
        }
        Some(Value::Object(m)) => Some(m),
        Some(Value::Array(_)) => {
            out.push(Violation::new(path, format!("must be exactly one {what}")));
            None
        }
        Some(_) => {
            out.push(Violation::new(path, format!("must be a {what} object")));
            None
        }
    }
}

/// Lists every structural violation in `doc`. Empty iff the document is a
/// single-body, single-target annotation with a well-formed
/// `MeshFaceSelector` and body fragment.
pub fn validate_wadm(doc: &Value) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(obj) = doc.as_object() else {
        out.push(Violation::new("$", "must be a JSON object"));
        return out;
    };

    match obj.get("@context") {
        None => out.push(Violation::new("$.@context", "is required")),
        Some(c) if !context_ok(c) => {
            out.push(Violation::new("$.@context", format!("must include {ANNO_CONTEXT}")))
        }
        _ => {}
    }
    if let Some(id) = expect_str(obj, "id", "$.id", &mut out) {
        let valid = id
            .strip_prefix(UUID_PREFIX)
            .is_some_and(|u| Uuid::parse_str(u).is_ok());
        if !valid {
            out.push(Violation::new("$.id", "must be a urn:uuid: identifier"));
        }
    }
    match obj.get("type") {
        Some(Value::String(t)) if t == "Annotation" => {}
        None => out.push(Violation::new("$.type", "is required")),
        Some(_) => out.push(Violation::new("$.type", "must be \"Annotation\"")),
    }

    let created = expect_str(obj, "created", "$.created", &mut out).and_then(|s| {
        let t = parse_timestamp(s);
        if t.is_none() {
            out.push(Violation::new("$.created", "must be an RFC 3339 timestamp"));
        }
        t
    });
    let modified = expect_str(obj, "modified", "$.modified", &mut out).and_then(|s| {
        let t = parse_timestamp(s);
        if t.is_none() {
            out.push(Violation::new("$.modified", "must be an RFC 3339 timestamp"));
        }
        t
    });
    if let (Some(c), Some(m)) = (created, modified) {
        if m < c {
            out.push(Violation::new("$.modified", "must not precede created"));
        }
    }
    if let Some(v) = obj.get("creator") {
        if !v.is_string() {
            out.push(Violation::new("$.creator", "must be a string literal"));
        }
    }

    if let Some(body) = expect_object(obj.get("body"), "$.body", "body", &mut out) {
        if body.get("type").and_then(Value::as_str) != Some("TextualBody") {
            out.push(Violation::new("$.body.type", "must be \"TextualBody\""));
        }
        if body.get("format").and_then(Value::as_str) != Some(BODY_FORMAT) {
            out.push(Violation::new("$.body.format", format!("must be \"{BODY_FORMAT}\"")));
        }
        if let Some(value) = expect_str(body, "value", "$.body.value", &mut out) {
            if let Err(e) = parse_body(value) {
                out.push(Violation::new("$.body.value", e.to_string()));
            }
        }
    }

    if let Some(target) = expect_object(obj.get("target"), "$.target", "target", &mut out) {
        if let Some(source) = expect_str(target, "source", "$.target.source", &mut out) {
            if mesh_id_from_uri(source).is_empty() {
                out.push(Violation::new("$.target.source", "must name a model"));
            }
        }
        if let Some(sel) = expect_object(
            target.get("selector"),
            "$.target.selector",
            "selector",
            &mut out,
        ) {
            if sel.get("type").and_then(Value::as_str) != Some(SELECTOR_TYPE) {
                out.push(Violation::new(
                    "$.target.selector.type",
                    format!("must be \"{SELECTOR_TYPE}\""),
                ));
            }
            index_list(sel.get("faces"), "$.target.selector.faces", true, &mut out);
            index_list(sel.get("vertices"), "$.target.selector.vertices", false, &mut out);
        }
    }
    out
}

/// Parses a document produced by [`to_wadm`] or a compatible producer.
pub fn from_wadm(doc: &Value, registry: &SchemaRegistry) -> Result<AnnotationRecord, AnnotationError> {
    if let Some(t) = doc
        .pointer("/target/selector/type")
        .and_then(Value::as_str)
    {
        if t != SELECTOR_TYPE {
            return Err(AnnotationError::SelectorUnsupported(t.to_string()));
        }
    }
    let violations = validate_wadm(doc);
    if !violations.is_empty() {
        return Err(AnnotationError::Validation(violations));
    }

    // Validation guarantees every access below.
    let obj = doc.as_object().expect("validated");
    let str_at = |ptr: &str| doc.pointer(ptr).and_then(Value::as_str).expect("validated");
    let body = parse_body(str_at("/body/value"))?;
    registry.resolve(&body.schema)?.validate(&body.fields)?;

    let indices = |ptr: &str| -> Vec<u32> {
        doc.pointer(ptr)
            .and_then(Value::as_array)
            .expect("validated")
            .iter()
            .map(|v| v.as_u64().expect("validated") as u32)
            .collect()
    };
    let mesh_id = mesh_id_from_uri(str_at("/target/source")).to_string();
    let faces = indices("/target/selector/faces");
    let vertices: BTreeSet<u32> = indices("/target/selector/vertices").into_iter().collect();

    let mut extensions = Map::new();
    if obj.get("@context") != Some(&Value::from(ANNO_CONTEXT)) {
        extensions.insert("@context".into(), obj["@context"].clone());
    }
    for (k, v) in obj {
        if !RESERVED.contains(&k.as_str()) {
            extensions.insert(k.clone(), v.clone());
        }
    }

    Ok(AnnotationRecord {
        id: Uuid::parse_str(&str_at("/id")[UUID_PREFIX.len()..]).expect("validated"),
        title: body.title,
        color: body.color,
        roi: SelectionSet::new(mesh_id, faces),
        derived_vertices: vertices,
        description: body.description,
        schema: body.schema,
        fields: body.fields,
        created_at: parse_timestamp(str_at("/created")).expect("validated"),
        modified_at: parse_timestamp(str_at("/modified")).expect("validated"),
        creator: obj
            .get("creator")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        extensions,
    })
}

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::AnnotationError;

/// Name of the schema that is always registered: it declares no keys.
pub const DEFAULT_SCHEMA: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldKind {
    Text,
    Number,
    Enum { values: Vec<String> },
    /// Calendar date, `YYYY-MM-DD`.
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub key: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

/// A user-defined set of typed annotation fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    pub version: u32,
    pub entries: Vec<FieldEntry>,
}

/// Reference from a record to the schema its fields follow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemaRef {
    pub name: String,
    pub version: u32,
}

impl SchemaRef {
    pub fn default_schema() -> Self {
        Self {
            name: DEFAULT_SCHEMA.into(),
            version: 1,
        }
    }
}

/// One offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub key: String,
    pub reason: String,
}

impl FieldViolation {
    pub fn new(key: &str, reason: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl FieldSchema {
    pub fn default_schema() -> Self {
        Self {
            name: DEFAULT_SCHEMA.into(),
            version: 1,
            entries: Vec::new(),
        }
    }

    pub fn reference(&self) -> SchemaRef {
        SchemaRef {
            name: self.name.clone(),
            version: self.version,
        }
    }

    /// Structural checks: non-empty name, version >= 1, unique keys and
    /// non-empty enum value lists.
    pub fn check(&self) -> Result<(), AnnotationError> {
        if self.name.trim().is_empty() {
            return Err(AnnotationError::InvalidSchema("schema name is empty".into()));
        }
        if self.version < 1 {
            return Err(AnnotationError::InvalidSchema("version must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if entry.key.is_empty() {
                return Err(AnnotationError::InvalidSchema("empty field key".into()));
            }
            if !seen.insert(entry.key.as_str()) {
                return Err(AnnotationError::InvalidSchema(format!(
                    "duplicate key `{}`",
                    entry.key
                )));
            }
            if let FieldKind::Enum { values } = &entry.kind {
                if values.is_empty() {
                    return Err(AnnotationError::InvalidSchema(format!(
                        "enum `{}` has no allowed values",
                        entry.key
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, key: &str) -> Option<&FieldEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Checks keys, kinds and enum membership. Keys may be omitted.
    pub fn validate(&self, fields: &IndexMap<String, String>) -> Result<(), AnnotationError> {
        let mut violations = Vec::new();
        for (key, value) in fields {
            let Some(entry) = self.entry(key) else {
                violations.push(FieldViolation::new(
                    key,
                    format!("is not declared by schema `{}` v{}", self.name, self.version),
                ));
                continue;
            };
            match &entry.kind {
                FieldKind::Text => {}
                FieldKind::Number => {
                    if !value.trim().parse::<f64>().is_ok_and(f64::is_finite) {
                        violations.push(FieldViolation::new(key, format!("`{value}` is not a number")));
                    }
                }
                FieldKind::Enum { values } => {
                    if !values.iter().any(|v| v == value) {
                        violations.push(FieldViolation::new(
                            key,
                            format!("`{value}` is not one of [{}]", values.join(", ")),
                        ));
                    }
                }
                FieldKind::Date => {
                    if chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d").is_err() {
                        violations.push(FieldViolation::new(
                            key,
                            format!("`{value}` is not a YYYY-MM-DD date"),
                        ));
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(AnnotationError::SchemaViolation(violations))
        }
    }
}

/// Known schemas keyed by name and version. The default schema is always
/// present.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaRegistry {
    schemas: BTreeMap<SchemaRef, FieldSchema>,
}

impl Default for SchemaRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl SchemaRegistry {
    pub fn new() -> Self {
        let default = FieldSchema::default_schema();
        Self {
            schemas: BTreeMap::from([(default.reference(), default)]),
        }
    }

    /// Adds or replaces a schema version.
    pub fn register(&mut self, schema: FieldSchema) -> Result<(), AnnotationError> {
        schema.check()?;
        self.schemas.insert(schema.reference(), schema);
        Ok(())
    }

    pub fn get(&self, reference: &SchemaRef) -> Option<&FieldSchema> {
        self.schemas.get(reference)
    }

    /// The highest registered version of `name`.
    pub fn latest(&self, name: &str) -> Option<&FieldSchema> {
        self.schemas
            .range(
                SchemaRef {
                    name: name.to_string(),
                    version: 0,
                }..=SchemaRef {
                    name: name.to_string(),
                    version: u32::MAX,
                },
            )
            .next_back()
            .map(|(_, s)| s)
    }

    pub fn resolve(&self, reference: &SchemaRef) -> Result<&FieldSchema, AnnotationError> {
        self.get(reference).ok_or_else(|| {
            AnnotationError::SchemaViolation(vec![FieldViolation::new(
                "schema",
                format!("unknown schema `{}` v{}", reference.name, reference.version),
            )])
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &FieldSchema> {
        self.schemas.values()
    }
}

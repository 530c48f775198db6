use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, DurationRound, TimeDelta, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uuid::Uuid;

use super::body::is_xml_illegal;
use super::{FieldSchema, SchemaRef};
use crate::error::AnnotationError;
use crate::mesh::TriangleMesh;
use crate::selection::SelectionSet;

/// Display color, one byte per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl FromStr for Rgb {
    type Err = String;

    /// Accepts `#rrggbb`, `rrggbb` or `r,g,b`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.contains(',') {
            let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<u8>()).collect();
            return match parts.as_slice() {
                [Ok(r), Ok(g), Ok(b)] => Ok(Rgb::new(*r, *g, *b)),
                _ => Err(format!("`{s}` is not an r,g,b triple of 0-255 values")),
            };
        }
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(format!("`{s}` is not a #rrggbb color"));
        }
        let channel = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("`{s}` is not a #rrggbb color"))
        };
        Ok(Rgb::new(channel(0)?, channel(2)?, channel(4)?))
    }
}

/// Input to [`create_annotation`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewAnnotation {
    pub roi: SelectionSet,
    pub title: String,
    pub color: Rgb,
    pub description: String,
    pub fields: IndexMap<String, String>,
    pub creator: String,
}

/// A region of interest with its metadata and structured fields.
///
/// `roi.mesh_id` identifies the annotated mesh. Equality is exact,
/// including the order of `fields`.
#[derive(Debug, Clone)]
pub struct AnnotationRecord {
    pub id: Uuid,
    pub title: String,
    pub color: Rgb,
    pub roi: SelectionSet,
    pub derived_vertices: BTreeSet<u32>,
    pub description: String,
    pub schema: SchemaRef,
    pub fields: IndexMap<String, String>,
    pub created_at: DateTime<Utc>,
    pub modified_at: DateTime<Utc>,
    pub creator: String,
    /// Top-level document members this crate does not interpret.
    pub extensions: Map<String, Value>,
}

impl PartialEq for AnnotationRecord {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.title == other.title
            && self.color == other.color
            && self.roi == other.roi
            && self.derived_vertices == other.derived_vertices
            && self.description == other.description
            && self.schema == other.schema
            && self.fields.iter().eq(other.fields.iter())
            && self.created_at == other.created_at
            && self.modified_at == other.modified_at
            && self.creator == other.creator
            && self.extensions.iter().eq(other.extensions.iter())
    }
}

/// Partial update. `None` leaves a property unchanged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationEdit {
    pub roi: Option<SelectionSet>,
    pub title: Option<String>,
    pub color: Option<Rgb>,
    pub description: Option<String>,
    pub fields: Option<IndexMap<String, String>>,
}

/// Current time at the precision timestamps are stored with.
pub fn now() -> DateTime<Utc> {
    Utc::now()
        .duration_trunc(TimeDelta::microseconds(1))
        .expect("current time is representable")
}

/// Union of the vertex triples of `faces`.
pub fn derive_vertices(mesh: &TriangleMesh, roi: &SelectionSet) -> BTreeSet<u32> {
    roi.faces
        .iter()
        .flat_map(|&f| mesh.faces()[f as usize])
        .collect()
}

fn check_text(what: &str, s: &str) -> Result<(), AnnotationError> {
    match s.chars().find(|&c| is_xml_illegal(c)) {
        Some(c) => Err(AnnotationError::Body(format!(
            "{what} contains the control character U+{:04X}",
            c as u32
        ))),
        None => Ok(()),
    }
}

fn check_texts(
    title: &str,
    description: &str,
    fields: &IndexMap<String, String>,
) -> Result<(), AnnotationError> {
    check_text("title", title)?;
    check_text("description", description)?;
    for (k, v) in fields {
        if k.is_empty() {
            return Err(AnnotationError::Body("empty field key".into()));
        }
        check_text("field key", k)?;
        check_text("field value", v)?;
    }
    Ok(())
}

/// Builds a fresh record for `new.roi` on `mesh`.
pub fn create_annotation(
    mesh_id: &str,
    mesh: &TriangleMesh,
    new: NewAnnotation,
    schema: &FieldSchema,
) -> Result<AnnotationRecord, AnnotationError> {
    if new.roi.mesh_id != mesh_id {
        return Err(AnnotationError::UnknownMesh(new.roi.mesh_id));
    }
    if new.roi.is_empty() {
        return Err(AnnotationError::EmptyRoi);
    }
    new.roi.check_bounds(mesh.face_count())?;
    schema.validate(&new.fields)?;
    check_texts(&new.title, &new.description, &new.fields)?;
    check_text("creator", &new.creator)?;
    let created = now();
    Ok(AnnotationRecord {
        id: Uuid::new_v4(),
        derived_vertices: derive_vertices(mesh, &new.roi),
        roi: new.roi,
        title: new.title,
        color: new.color,
        description: new.description,
        schema: schema.reference(),
        fields: new.fields,
        created_at: created,
        modified_at: created,
        creator: new.creator,
        extensions: Map::new(),
    })
}

impl AnnotationRecord {
    pub fn mesh_id(&self) -> &str {
        &self.roi.mesh_id
    }

    /// Applies `edit`, revalidating against `schema`. The schema of the
    /// result is `schema`; `modified_at` strictly increases.
    pub fn edited(
        &self,
        mesh: &TriangleMesh,
        edit: AnnotationEdit,
        schema: &FieldSchema,
    ) -> Result<AnnotationRecord, AnnotationError> {
        let mut next = self.clone();
        if let Some(roi) = edit.roi {
            if roi.mesh_id != self.roi.mesh_id {
                return Err(AnnotationError::UnknownMesh(roi.mesh_id));
            }
            if roi.is_empty() {
                return Err(AnnotationError::EmptyRoi);
            }
            roi.check_bounds(mesh.face_count())?;
            next.derived_vertices = derive_vertices(mesh, &roi);
            next.roi = roi;
        }
        if let Some(title) = edit.title {
            next.title = title;
        }
        if let Some(color) = edit.color {
            next.color = color;
        }
        if let Some(description) = edit.description {
            next.description = description;
        }
        if let Some(fields) = edit.fields {
            next.fields = fields;
        }
        schema.validate(&next.fields)?;
        check_texts(&next.title, &next.description, &next.fields)?;
        next.schema = schema.reference();
        next.modified_at = now().max(self.modified_at + TimeDelta::microseconds(1));
        Ok(next)
    }

    /// Checks the record invariants that need the mesh.
    pub fn check_against(&self, mesh: &TriangleMesh) -> Result<(), AnnotationError> {
        self.roi.check_bounds(mesh.face_count())?;
        if derive_vertices(mesh, &self.roi) != self.derived_vertices {
            return Err(AnnotationError::Body(
                "vertex list does not match the selected faces".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{FieldEntry, FieldKind};
    use crate::shapes::unit_cube;

    fn single_triangle() -> TriangleMesh {
        TriangleMesh::new(
            "tri",
            vec![
                crate::Point3::new(0.0, 0.0, 0.0),
                crate::Point3::new(1.0, 0.0, 0.0),
                crate::Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn new_on(mesh_id: &str, faces: &[u32]) -> NewAnnotation {
        NewAnnotation {
            roi: SelectionSet::new(mesh_id, faces.iter().copied()),
            title: "crack".into(),
            color: Rgb::new(200, 30, 30),
            description: String::new(),
            fields: IndexMap::new(),
            creator: "conservator".into(),
        }
    }

    #[test]
    fn derived_vertices_of_single_triangle() {
        let mesh = single_triangle();
        let rec = create_annotation("m", &mesh, new_on("m", &[0]), &FieldSchema::default_schema()).unwrap();
        assert_eq!(rec.derived_vertices, BTreeSet::from([0, 1, 2]));
        assert_eq!(rec.created_at, rec.modified_at);
        assert_eq!(rec.id.get_version_num(), 4);
    }

    #[test]
    fn create_errors() {
        let mesh = single_triangle();
        let schema = FieldSchema::default_schema();
        assert!(matches!(
            create_annotation("m", &mesh, new_on("m", &[]), &schema),
            Err(AnnotationError::EmptyRoi)
        ));
        assert!(matches!(
            create_annotation("m", &mesh, new_on("other", &[0]), &schema),
            Err(AnnotationError::UnknownMesh(_))
        ));
        assert!(matches!(
            create_annotation("m", &mesh, new_on("m", &[3]), &schema),
            Err(AnnotationError::Selection(_))
        ));
        let mut bad = new_on("m", &[0]);
        bad.title = "a\u{1}b".into();
        assert!(matches!(
            create_annotation("m", &mesh, bad, &schema),
            Err(AnnotationError::Body(_))
        ));
    }

    #[test]
    fn enum_field_validation_on_create() {
        let mesh = single_triangle();
        let schema = FieldSchema {
            name: "stone".into(),
            version: 1,
            entries: vec![FieldEntry {
                key: "material".into(),
                kind: FieldKind::Enum {
                    values: vec!["marble".into(), "limestone".into()],
                },
            }],
        };
        let mut ok = new_on("m", &[0]);
        ok.fields.insert("material".into(), "marble".into());
        assert!(create_annotation("m", &mesh, ok, &schema).is_ok());
        let mut bad = new_on("m", &[0]);
        bad.fields.insert("material".into(), "steel".into());
        match create_annotation("m", &mesh, bad, &schema) {
            Err(AnnotationError::SchemaViolation(v)) => assert_eq!(v[0].key, "material"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edits_bump_modified_and_rederive() {
        let mesh = unit_cube();
        let schema = FieldSchema::default_schema();
        let rec = create_annotation("c", &mesh, new_on("c", &[0]), &schema).unwrap();
        let edit = AnnotationEdit {
            roi: Some(SelectionSet::new("c", 0..12)),
            title: Some("whole".into()),
            ..Default::default()
        };
        let next = rec.edited(&mesh, edit, &schema).unwrap();
        assert!(next.modified_at > rec.modified_at);
        assert_eq!(next.created_at, rec.created_at);
        assert_eq!(next.derived_vertices.len(), 8);
        assert_eq!(next.title, "whole");
        assert_eq!(next.id, rec.id);
        next.check_against(&mesh).unwrap();
    }

    #[test]
    fn rgb_parsing() {
        assert_eq!("#ff8000".parse::<Rgb>().unwrap(), Rgb::new(255, 128, 0));
        assert_eq!("1, 2,3".parse::<Rgb>().unwrap(), Rgb::new(1, 2, 3));
        assert!("256,0,0".parse::<Rgb>().is_err());
        assert!("#ff80".parse::<Rgb>().is_err());
        assert_eq!(Rgb::new(255, 128, 0).to_string(), "#ff8000");
    }
}

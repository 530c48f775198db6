//! Print-oriented HTML report of a model and its annotations.
//!
//! The document is self-contained (inline CSS, no scripts or external
//! assets) and fully determined by the model, its annotations and the
//! injected generation timestamp.

use std::fmt::Write;

use chrono::{DateTime, Utc};
use meshnote_core::annotation::format_timestamp;
use meshnote_core::{AnnotationRecord, TriangleMesh};

use crate::store::ModelEntry;

const STYLE: &str = "\
body{font-family:Helvetica,Arial,sans-serif;margin:2em;color:#222}\
h1{font-size:1.6em;margin-bottom:.2em}\
h2{font-size:1.25em;margin:0 0 .5em}\
table{border-collapse:collapse;margin:.5em 0}\
th,td{border:1px solid #bbb;padding:.25em .6em;text-align:left;vertical-align:top}\
th{background:#f0f0f0}\
.swatch{display:inline-block;width:1em;height:1em;border:1px solid #444;vertical-align:middle;margin-right:.4em}\
section{margin-top:1.5em;padding-top:.5em;border-top:2px solid #444}\
.annotation{page-break-inside:avoid;break-inside:avoid}\
.generated{color:#666;font-size:.85em}\
@media print{body{margin:0}}";

/// Figures shown for one annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSummary {
    pub face_count: usize,
    /// Sum of the areas of the selected faces.
    pub region_area: f64,
}

pub fn summarize(mesh: &TriangleMesh, areas: &[f64], record: &AnnotationRecord) -> AnnotationSummary {
    debug_assert_eq!(areas.len(), mesh.face_count());
    AnnotationSummary {
        face_count: record.roi.len(),
        region_area: record.roi.faces.iter().map(|&f| areas[f as usize]).sum(),
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn number(x: f64) -> String {
    format!("{x:.6}")
}

fn point(p: [f64; 3]) -> String {
    format!("({}, {}, {})", number(p[0]), number(p[1]), number(p[2]))
}

/// Renders the report. `records` must be in creation order.
pub fn render_html(
    entry: &ModelEntry,
    mesh: &TriangleMesh,
    records: &[AnnotationRecord],
    generated_at: DateTime<Utc>,
) -> String {
    let areas = mesh.face_areas();
    let total_area: f64 = areas.iter().sum();
    let mut h = String::new();
    let title = format!("Annotation report: {}", escape(&entry.name));

    let _ = write!(
        h,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n\
         <h1>{title}</h1>\n<p class=\"generated\">Generated {}</p>\n",
        format_timestamp(&generated_at)
    );

    let _ = write!(
        h,
        "<section class=\"model\">\n<h2>Model</h2>\n<table>\n\
         <tr><th>Name</th><td>{}</td></tr>\n\
         <tr><th>Model id</th><td><code>{}</code></td></tr>\n\
         <tr><th>Format</th><td>{}</td></tr>\n\
         <tr><th>Faces</th><td class=\"face-count\">{}</td></tr>\n\
         <tr><th>Vertices</th><td class=\"vertex-count\">{}</td></tr>\n\
         <tr><th>Bounding box</th><td>min {} max {}</td></tr>\n\
         <tr><th>Surface area</th><td class=\"total-area\" data-value=\"{:e}\">{}</td></tr>\n\
         <tr><th>Annotations</th><td>{}</td></tr>\n\
         </table>\n</section>\n",
        escape(&entry.name),
        escape(&entry.model_id),
        entry.format.extension(),
        entry.face_count,
        entry.vertex_count,
        point(entry.bounding_box.min),
        point(entry.bounding_box.max),
        total_area,
        number(total_area),
        records.len(),
    );

    if records.is_empty() {
        h.push_str(
            "<section class=\"no-annotations\">\n<h2>Annotations</h2>\n\
             <p>No annotations.</p>\n</section>\n",
        );
    }

    for (i, record) in records.iter().enumerate() {
        let summary = summarize(mesh, &areas, record);
        let _ = write!(
            h,
            "<section class=\"annotation\" id=\"annotation-{id}\">\n\
             <h2><span class=\"swatch\" style=\"background:{color}\"></span>{n}. {title}</h2>\n\
             <table>\n\
             <tr><th>Id</th><td><code>{id}</code></td></tr>\n\
             <tr><th>Color</th><td>{color}</td></tr>\n\
             <tr><th>Creator</th><td>{creator}</td></tr>\n\
             <tr><th>Created</th><td>{created}</td></tr>\n\
             <tr><th>Modified</th><td>{modified}</td></tr>\n\
             <tr><th>Selected faces</th><td class=\"region-faces\">{faces}</td></tr>\n\
             <tr><th>Region area</th><td class=\"region-area\" data-value=\"{area_exact:e}\">{area}</td></tr>\n\
             <tr><th>Schema</th><td>{schema} v{version}</td></tr>\n\
             </table>\n",
            id = record.id,
            color = record.color,
            n = i + 1,
            title = escape(&record.title),
            creator = escape(&record.creator),
            created = format_timestamp(&record.created_at),
            modified = format_timestamp(&record.modified_at),
            faces = summary.face_count,
            area_exact = summary.region_area,
            area = number(summary.region_area),
            schema = escape(&record.schema.name),
            version = record.schema.version,
        );
        h.push_str("<h3>Description</h3>\n");
        if record.description.is_empty() {
            h.push_str("<p class=\"description empty\">(none)</p>\n");
        } else {
            let _ = writeln!(
                h,
                "<p class=\"description\">{}</p>",
                escape(&record.description).replace('\n', "<br>\n")
            );
        }
        h.push_str("<h3>Fields</h3>\n");
        if record.fields.is_empty() {
            h.push_str("<p class=\"fields empty\">(none)</p>\n");
        } else {
            h.push_str("<table class=\"fields\">\n<tr><th>Field</th><th>Value</th></tr>\n");
            for (k, v) in &record.fields {
                let _ = writeln!(h, "<tr><td>{}</td><td>{}</td></tr>", escape(k), escape(v));
            }
            h.push_str("</table>\n");
        }
        h.push_str("</section>\n");
    }

    h.push_str("</body>\n</html>\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Bounds;
    use meshnote_core::annotation::SchemaRef;
    use meshnote_core::shapes::unit_cube;
    use meshnote_core::{MeshFormat, Rgb, SelectionSet};

    fn entry() -> ModelEntry {
        ModelEntry {
            model_id: "abc".into(),
            name: "cube <1>.obj".into(),
            format: MeshFormat::Obj,
            face_count: 12,
            vertex_count: 8,
            bounding_box: Bounds {
                min: [0.0; 3],
                max: [1.0; 3],
            },
            texture_ref: None,
            uploaded_at: "2024-01-01T00:00:00Z".parse().unwrap(),
        }
    }

    fn record(title: &str, faces: Vec<u32>) -> AnnotationRecord {
        let t = "2024-02-02T00:00:00Z".parse().unwrap();
        AnnotationRecord {
            id: uuid::Uuid::new_v4(),
            title: title.into(),
            color: Rgb::new(10, 20, 30),
            roi: SelectionSet::new("abc", faces),
            derived_vertices: Default::default(),
            description: "line one\nline & two".into(),
            schema: SchemaRef::default_schema(),
            fields: [("k".to_string(), "<v>".to_string())].into_iter().collect(),
            created_at: t,
            modified_at: t,
            creator: "ana".into(),
            extensions: Default::default(),
        }
    }

    #[test]
    fn empty_report_says_so() {
        let html = render_html(&entry(), &unit_cube(), &[], Utc::now());
        assert!(html.contains("No annotations."));
        assert!(html.contains("cube &lt;1&gt;.obj"));
        assert!(!html.contains("class=\"annotation\""));
    }

    #[test]
    fn sections_follow_record_order_and_escape_text() {
        let records = vec![record("first", vec![0]), record("second", vec![1, 2])];
        let html = render_html(&entry(), &unit_cube(), &records, Utc::now());
        assert_eq!(html.matches("<section class=\"annotation\"").count(), 2);
        assert!(html.find("1. first").unwrap() < html.find("2. second").unwrap());
        assert!(html.contains("line one<br>\nline &amp; two"));
        assert!(html.contains("&lt;v&gt;"));
        assert!(html.contains("background:#0a141e"));
    }

    #[test]
    fn output_is_deterministic() {
        let records = vec![record("a", (0..12).collect())];
        let t = "2024-05-05T12:00:00Z".parse().unwrap();
        let a = render_html(&entry(), &unit_cube(), &records, t);
        let b = render_html(&entry(), &unit_cube(), &records, t);
        assert_eq!(a, b);
        assert!(a.contains(">6.000000<"));
    }
}

//! The XML fragment carried in the annotation body.
//!
//! ```xml
//! <artemis-body version="1">
//!   <title>..</title><color r=".." g=".." b=".."/><description>..</description>
//!   <schema name=".." version=".."/><field key="..">..</field>*
//! </artemis-body>
//! ```
//!
//! The writer emits no whitespace between elements. Tab, CR and LF are
//! written as character references so they survive XML normalization.

use indexmap::IndexMap;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{Rgb, SchemaRef};
use crate::error::AnnotationError;

pub const ROOT: &str = "artemis-body";
pub const BODY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub title: String,
    pub color: Rgb,
    pub description: String,
    pub schema: SchemaRef,
    pub fields: IndexMap<String, String>,
}

/// True for characters XML 1.0 cannot carry, even as references.
pub fn is_xml_illegal(c: char) -> bool {
    matches!(c, '\u{0}'..='\u{8}' | '\u{B}' | '\u{C}' | '\u{E}'..='\u{1F}' | '\u{FFFE}' | '\u{FFFF}')
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\t' => out.push_str("&#x9;"),
            '\n' => out.push_str("&#xA;"),
            '\r' => out.push_str("&#xD;"),
            c => out.push(c),
        }
    }
}

pub fn write_body(body: &Body) -> String {
    let mut out = String::with_capacity(256);
    out.push_str(&format!("<{ROOT} version=\"{BODY_VERSION}\"><title>"));
    escape_into(&mut out, &body.title);
    let Rgb { r, g, b } = body.color;
    out.push_str(&format!("</title><color r=\"{r}\" g=\"{g}\" b=\"{b}\"/><description>"));
    escape_into(&mut out, &body.description);
    out.push_str("</description><schema name=\"");
    escape_into(&mut out, &body.schema.name);
    out.push_str(&format!("\" version=\"{}\"/>", body.schema.version));
    for (key, value) in &body.fields {
        out.push_str("<field key=\"");
        escape_into(&mut out, key);
        out.push_str("\">");
        escape_into(&mut out, value);
        out.push_str("</field>");
    }
    out.push_str(&format!("</{ROOT}>"));
    out
}

fn err(msg: impl Into<String>) -> AnnotationError {
    AnnotationError::Body(msg.into())
}

fn attr(e: &BytesStart, name: &str) -> Result<String, AnnotationError> {
    let a = e
        .try_get_attribute(name)
        .map_err(|x| err(x.to_string()))?
        .ok_or_else(|| err(format!("<{}> lacks attribute `{name}`", String::from_utf8_lossy(e.name().as_ref()))))?;
    Ok(a.unescape_value().map_err(|x| err(x.to_string()))?.into_owned())
}

fn numeric_attr<T: std::str::FromStr>(e: &BytesStart, name: &str) -> Result<T, AnnotationError> {
    let raw = attr(e, name)?;
    raw.parse()
        .map_err(|_| err(format!("attribute `{name}` = `{raw}` is out of range")))
}

/// Which text-bearing element is open.
enum Open {
    Title,
    Description,
    Field(String),
}

pub fn parse_body(xml: &str) -> Result<Body, AnnotationError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);

    let mut root_seen = false;
    let mut root_closed = false;
    let mut title = None;
    let mut color = None;
    let mut description = None;
    let mut schema = None;
    let mut fields = IndexMap::new();
    let mut open: Option<(Open, String)> = None;

    loop {
        let event = reader.read_event().map_err(|e| err(e.to_string()))?;
        match event {
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| err(e.to_string()))?;
                match &mut open {
                    Some((_, buf)) => buf.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(err("unexpected text outside an element")),
                }
            }
            Event::CData(c) => {
                let text = std::str::from_utf8(&c).map_err(|e| err(e.to_string()))?;
                match &mut open {
                    Some((_, buf)) => buf.push_str(text),
                    None => return Err(err("unexpected CDATA outside an element")),
                }
            }
            Event::Start(e) if !root_seen => open_root(&e, &mut root_seen)?,
            Event::Empty(e) if !root_seen => {
                open_root(&e, &mut root_seen)?;
                root_closed = true;
            }
            Event::Start(e) => {
                if open.is_some() || root_closed {
                    return Err(err("unexpected nested element"));
                }
                let kind = match e.name().as_ref() {
                    b"title" => Open::Title,
                    b"description" => Open::Description,
                    b"field" => Open::Field(attr(&e, "key")?),
                    b"color" | b"schema" => {
                        // `<color ...></color>`: the end tag is skipped below.
                        read_empty_like(&e, &mut color, &mut schema)?;
                        continue;
                    }
                    other => {
                        return Err(err(format!(
                            "unknown element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                };
                open = Some((kind, String::new()));
            }
            Event::Empty(e) => {
                if open.is_some() || root_closed {
                    return Err(err("unexpected nested element"));
                }
                match e.name().as_ref() {
                    b"color" | b"schema" => read_empty_like(&e, &mut color, &mut schema)?,
                    b"title" => set_once(&mut title, String::new(), "title")?,
                    b"description" => set_once(&mut description, String::new(), "description")?,
                    b"field" => {
                        let key = attr(&e, "key")?;
                        insert_field(&mut fields, key, String::new())?;
                    }
                    other => {
                        return Err(err(format!(
                            "unknown element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                }
            }
            Event::End(e) => match open.take() {
                Some((kind, text)) => match kind {
                    Open::Title => set_once(&mut title, text, "title")?,
                    Open::Description => set_once(&mut description, text, "description")?,
                    Open::Field(key) => insert_field(&mut fields, key, text)?,
                },
                None if e.name().as_ref() == ROOT.as_bytes() => root_closed = true,
                None if matches!(e.name().as_ref(), b"color" | b"schema") => {}
                None => return Err(err("unbalanced end tag")),
            },
        }
    }

    if !root_seen {
        return Err(err(format!("missing <{ROOT}> element")));
    }
    if !root_closed {
        return Err(err(format!("unterminated <{ROOT}> element")));
    }
    Ok(Body {
        title: title.ok_or_else(|| err("missing <title>"))?,
        color: color.ok_or_else(|| err("missing <color>"))?,
        description: description.unwrap_or_default(),
        schema: schema.ok_or_else(|| err("missing <schema>"))?,
        fields,
    })
}

fn open_root(e: &BytesStart, root_seen: &mut bool) -> Result<(), AnnotationError> {
    if e.name().as_ref() != ROOT.as_bytes() {
        return Err(err(format!("root element must be <{ROOT}>")));
    }
    let version: u32 = numeric_attr(e, "version")?;
    if version != BODY_VERSION {
        return Err(err(format!("unsupported body version {version}")));
    }
    *root_seen = true;
    Ok(())
}

fn read_empty_like(
    e: &BytesStart,
    color: &mut Option<Rgb>,
    schema: &mut Option<SchemaRef>,
) -> Result<(), AnnotationError> {
    match e.name().as_ref() {
        b"color" => {
            let rgb = Rgb {
                r: numeric_attr(e, "r")?,
                g: numeric_attr(e, "g")?,
                b: numeric_attr(e, "b")?,
            };
            set_once(color, rgb, "color")
        }
        _ => {
            let reference = SchemaRef {
                name: attr(e, "name")?,
                version: numeric_attr(e, "version")?,
            };
            set_once(schema, reference, "schema")
        }
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, what: &str) -> Result<(), AnnotationError> {
    if slot.is_some() {
        return Err(err(format!("duplicate <{what}>")));
    }
    *slot = Some(value);
    Ok(())
}

fn insert_field(
    fields: &mut IndexMap<String, String>,
    key: String,
    value: String,
) -> Result<(), AnnotationError> {
    if fields.contains_key(&key) {
        return Err(err(format!("duplicate field `{key}`")));
    }
    fields.insert(key, value);
    Ok(())
}

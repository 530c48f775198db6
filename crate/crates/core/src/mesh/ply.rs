//! PLY reader: ASCII and binary little-endian, `vertex` and `face` elements.
//! Other elements are skipped with a warning.

use super::{fan_triangulate, TriangleMesh, ISOLATED_NORMAL};
use crate::error::MeshError;
use crate::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str, line: usize) -> Result<Self, MeshError> {
        Ok(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            other => return Err(MeshError::parse(line, format!("unknown PLY type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Self::Scalar { name, .. } | Self::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Reads values either from whitespace-separated text or from a binary cursor.
enum Source<'a> {
    Ascii {
        lines: std::iter::Enumerate<std::str::Lines<'a>>,
        tokens: Vec<&'a str>,
        cursor: usize,
        line: usize,
        first_line: usize,
    },
    Binary {
        data: &'a [u8],
        offset: usize,
        base: usize,
    },
}

impl Source<'_> {
    /// ASCII records are one per line; called before reading each record.
    fn begin_record(&mut self) -> Result<(), MeshError> {
        if let Source::Ascii {
            lines,
            tokens,
            cursor,
            line,
            first_line,
        } = self
        {
            loop {
                let (n, text) = lines
                    .next()
                    .ok_or_else(|| MeshError::parse(*line + 1, "unexpected end of PLY data"))?;
                *line = *first_line + n;
                let trimmed = text.trim();
                if !trimmed.is_empty() {
                    *tokens = trimmed.split_ascii_whitespace().collect();
                    *cursor = 0;
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn read(&mut self, ty: Scalar) -> Result<f64, MeshError> {
        match self {
            Source::Ascii {
                tokens, cursor, line, ..
            } => {
                let token = tokens
                    .get(*cursor)
                    .ok_or_else(|| MeshError::parse(*line, "too few values in PLY record"))?;
                *cursor += 1;
                token
                    .parse::<f64>()
                    .map_err(|_| MeshError::parse(*line, format!("invalid PLY value `{token}`")))
            }
            Source::Binary { data, offset, base } => {
                let size = ty.size();
                let bytes = data.get(*offset..*offset + size).ok_or_else(|| {
                    MeshError::parse(0, format!("binary PLY truncated at byte {}", *base + *offset))
                })?;
                *offset += size;
                Ok(match ty {
                    Scalar::I8 => bytes[0] as i8 as f64,
                    Scalar::U8 => bytes[0] as f64,
                    Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
                    Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
                    Scalar::I32 => i32::from_le_bytes(bytes.try_into().unwrap()) as f64,
                    Scalar::U32 => u32::from_le_bytes(bytes.try_into().unwrap()) as f64,
                    Scalar::F32 => f32::from_le_bytes(bytes.try_into().unwrap()) as f64,
                    Scalar::F64 => f64::from_le_bytes(bytes.try_into().unwrap()),
                })
            }
        }
    }

    fn end_record(&self) -> Result<(), MeshError> {
        if let Source::Ascii {
            tokens, cursor, line, ..
        } = self
        {
            if *cursor != tokens.len() {
                return Err(MeshError::parse(*line, "too many values in PLY record"));
            }
        }
        Ok(())
    }

    fn line(&self) -> usize {
        match self {
            Source::Ascii { line, .. } => *line,
            Source::Binary { .. } => 0,
        }
    }
}

fn read_header(bytes: &[u8]) -> Result<(Encoding, Vec<Element>, usize, usize), MeshError> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| MeshError::parse(line_no + 1, "PLY header is not terminated"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| MeshError::parse(line_no + 1, "PLY header is not valid text"))?
            .trim();
        offset += end + 1;
        line_no += 1;
        let mut tokens = line.split_ascii_whitespace();
        let keyword = tokens.next().unwrap_or("");
        if line_no == 1 {
            if line != "ply" {
                return Err(MeshError::parse(1, "missing `ply` magic"));
            }
            continue;
        }
        match keyword {
            "format" => {
                encoding = Some(match tokens.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLittleEndian,
                    Some(other) => {
                        return Err(MeshError::parse(
                            line_no,
                            format!("unsupported PLY encoding `{other}`"),
                        ))
                    }
                    None => return Err(MeshError::parse(line_no, "missing PLY encoding")),
                });
            }
            "element" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| MeshError::parse(line_no, "element without a name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| MeshError::parse(line_no, "element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| MeshError::parse(line_no, "property before any element"))?;
                let parts: Vec<&str> = tokens.collect();
                let property = match parts.as_slice() {
                    ["list", count, item, name] => Property::List {
                        name: name.to_string(),
                        count: Scalar::parse(count, line_no)?,
                        item: Scalar::parse(item, line_no)?,
                    },
                    [ty, name] => Property::Scalar {
                        name: name.to_string(),
                        ty: Scalar::parse(ty, line_no)?,
                    },
                    _ => return Err(MeshError::parse(line_no, "malformed property line")),
                };
                element.properties.push(property);
            }
            "end_header" => break,
            "comment" | "obj_info" | "" => {}
            other => {
                return Err(MeshError::parse(
                    line_no,
                    format!("unexpected header keyword `{other}`"),
                ))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| MeshError::parse(line_no, "missing format line"))?;
    Ok((encoding, elements, offset, line_no))
}

pub fn parse_ply(bytes: &[u8], name: impl Into<String>) -> Result<TriangleMesh, MeshError> {
    let (encoding, elements, body_offset, header_lines) = read_header(bytes)?;
    let body = &bytes[body_offset..];
    let text;
    let mut source = match encoding {
        Encoding::Ascii => {
            text = std::str::from_utf8(body)
                .map_err(|_| MeshError::parse(header_lines + 1, "ASCII PLY body is not text"))?;
            Source::Ascii {
                lines: text.lines().enumerate(),
                tokens: Vec::new(),
                cursor: 0,
                line: header_lines,
                first_line: header_lines + 1,
            }
        }
        Encoding::BinaryLittleEndian => Source::Binary {
            data: body,
            offset: 0,
            base: body_offset,
        },
    };

    let mut positions: Vec<Point3> = Vec::new();
    let mut normals: Vec<Vector3> = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut has_normals = false;
    let mut has_uvs = false;

    for element in &elements {
        match element.name.as_str() {
            "vertex" => {
                let find = |names: &[&str]| {
                    element
                        .properties
                        .iter()
                        .position(|p| names.contains(&p.name()))
                };
                let xyz = [find(&["x"]), find(&["y"]), find(&["z"])];
                let nxyz = [find(&["nx"]), find(&["ny"]), find(&["nz"])];
                let uv = [
                    find(&["u", "s", "texture_u", "texture_s"]),
                    find(&["v", "t", "texture_v", "texture_t"]),
                ];
                let [Some(ix), Some(iy), Some(iz)] = xyz else {
                    return Err(MeshError::parse(
                        header_lines,
                        "vertex element lacks x/y/z properties",
                    ));
                };
                has_normals = nxyz.iter().all(Option::is_some);
                has_uvs = uv.iter().all(Option::is_some);
                let mut values = vec![0.0; element.properties.len()];
                positions.reserve(element.count);
                for _ in 0..element.count {
                    source.begin_record()?;
                    for (slot, property) in values.iter_mut().zip(&element.properties) {
                        *slot = match property {
                            Property::Scalar { ty, .. } => source.read(*ty)?,
                            Property::List { count, item, .. } => {
                                let n = source.read(*count)? as usize;
                                for _ in 0..n {
                                    source.read(*item)?;
                                }
                                0.0
                            }
                        };
                    }
                    source.end_record()?;
                    positions.push(Point3::new(values[ix], values[iy], values[iz]));
                    if has_normals {
                        let n = Vector3::new(
                            values[nxyz[0].unwrap()],
                            values[nxyz[1].unwrap()],
                            values[nxyz[2].unwrap()],
                        );
                        normals.push(n.try_normalize(0.0).unwrap_or(ISOLATED_NORMAL));
                    }
                    if has_uvs {
                        uvs.push([values[uv[0].unwrap()], values[uv[1].unwrap()]]);
                    }
                }
            }
            "face" => {
                let index_property = element
                    .properties
                    .iter()
                    .position(|p| {
                        matches!(p, Property::List { .. })
                            && matches!(p.name(), "vertex_indices" | "vertex_index")
                    })
                    .ok_or_else(|| {
                        MeshError::parse(header_lines, "face element lacks vertex_indices")
                    })?;
                let mut corners: Vec<u32> = Vec::new();
                for face in 0..element.count {
                    source.begin_record()?;
                    for (k, property) in element.properties.iter().enumerate() {
                        match property {
                            Property::Scalar { ty, .. } => {
                                source.read(*ty)?;
                            }
                            Property::List { count, item, .. } => {
                                let n = source.read(*count)?;
                                if n < 0.0 {
                                    return Err(MeshError::parse(source.line(), "negative list length"));
                                }
                                let keep = k == index_property;
                                if keep {
                                    corners.clear();
                                }
                                for _ in 0..n as usize {
                                    let value = source.read(*item)?;
                                    if keep {
                                        if value < 0.0 || value.fract() != 0.0 {
                                            return Err(MeshError::parse(
                                                source.line(),
                                                format!("invalid vertex index {value}"),
                                            ));
                                        }
                                        if value as usize >= positions.len() {
                                            return Err(MeshError::Index {
                                                face,
                                                index: value as usize,
                                                vertex_count: positions.len(),
                                            });
                                        }
                                        corners.push(value as u32);
                                    }
                                }
                            }
                        }
                    }
                    source.end_record()?;
                    if corners.len() < 3 {
                        return Err(MeshError::parse(
                            source.line(),
                            format!("face {face} has fewer than 3 vertices"),
                        ));
                    }
                    faces.extend(fan_triangulate(&corners));
                }
            }
            other => {
                log::warn!("skipping PLY element `{other}` ({} records)", element.count);
                for _ in 0..element.count {
                    source.begin_record()?;
                    for property in &element.properties {
                        match property {
                            Property::Scalar { ty, .. } => {
                                source.read(*ty)?;
                            }
                            Property::List { count, item, .. } => {
                                let n = source.read(*count)? as usize;
                                for _ in 0..n {
                                    source.read(*item)?;
                                }
                            }
                        }
                    }
                    source.end_record()?;
                }
            }
        }
    }

    if faces.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    let mut mesh = TriangleMesh::new(name, positions, faces)?;
    if has_normals {
        mesh = mesh.with_normals(normals)?;
    }
    if has_uvs {
        mesh = mesh.with_uvs(uvs)?;
    }
    Ok(mesh)
}

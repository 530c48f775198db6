//! Wavefront OBJ subset: `v`, `vt`, `vn`, `f`, plus `mtllib`/`usemtl` as
//! texture hints. Every other statement is ignored.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{fan_triangulate, TriangleMesh, ISOLATED_NORMAL};
use crate::error::MeshError;
use crate::{Point3, Vector3};

#[derive(Clone, Copy)]
struct Corner {
    position: u32,
    uv: Option<u32>,
    normal: Option<u32>,
}

pub fn parse_obj(bytes: &[u8], name: impl Into<String>) -> Result<TriangleMesh, MeshError> {
    let text = String::from_utf8_lossy(bytes);

    let mut positions: Vec<Point3> = Vec::new();
    let mut uvs: Vec<[f64; 2]> = Vec::new();
    let mut normals: Vec<Vector3> = Vec::new();
    let mut triangles: Vec<[Corner; 3]> = Vec::new();
    let mut mtllib: Option<String> = None;
    let mut usemtl: Option<String> = None;

    for (number, raw) in text.lines().enumerate() {
        let line_no = number + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_ascii_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let [x, y, z] = parse_floats::<3>(&mut tokens, line_no, "v")?;
                positions.push(Point3::new(x, y, z));
            }
            "vt" => {
                let [u, v] = parse_floats::<2>(&mut tokens, line_no, "vt")?;
                uvs.push([u, v]);
            }
            "vn" => {
                let [x, y, z] = parse_floats::<3>(&mut tokens, line_no, "vn")?;
                normals.push(Vector3::new(x, y, z));
            }
            "f" => {
                let face = triangles.len();
                let corners = tokens
                    .map(|t| {
                        parse_corner(t, line_no, face, positions.len(), uvs.len(), normals.len())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if corners.len() < 3 {
                    return Err(MeshError::parse(
                        line_no,
                        format!("face has {} corners, need at least 3", corners.len()),
                    ));
                }
                triangles.extend(fan_triangulate(&corners));
            }
            "mtllib" => {
                if mtllib.is_none() {
                    mtllib = tokens.next().map(str::to_string);
                }
            }
            "usemtl" => {
                if usemtl.is_none() {
                    usemtl = tokens.next().map(str::to_string);
                }
            }
            _ => {}
        }
    }

    if triangles.is_empty() {
        return Err(MeshError::EmptyMesh);
    }

    let use_uv = triangles.iter().flatten().all(|c| c.uv.is_some());
    let use_normal = triangles.iter().flatten().all(|c| c.normal.is_some());

    if !use_uv && !use_normal {
        let faces = triangles
            .iter()
            .map(|t| [t[0].position, t[1].position, t[2].position])
            .collect();
        return Ok(TriangleMesh::new(name, positions, faces)?
            .with_texture_ref(mtllib.or(usemtl)));
    }

    // Split vertices whose corners disagree on attributes. The first
    // attribute combination seen for a position keeps the original index.
    type Key = (u32, Option<u32>, Option<u32>);
    let key_of = |c: &Corner| -> Key {
        (
            c.position,
            c.uv.filter(|_| use_uv),
            c.normal.filter(|_| use_normal),
        )
    };
    let original_count = positions.len();
    let mut claimed = vec![false; original_count];
    let mut slots: HashMap<Key, u32> = HashMap::new();
    let mut slot_keys: Vec<Option<Key>> = vec![None; original_count];
    let mut out_positions = positions.clone();
    let mut faces = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let mut face = [0u32; 3];
        for (k, corner) in tri.iter().enumerate() {
            let key = key_of(corner);
            face[k] = *slots.entry(key).or_insert_with(|| {
                let p = corner.position as usize;
                if !claimed[p] {
                    claimed[p] = true;
                    slot_keys[p] = Some(key);
                    corner.position
                } else {
                    out_positions.push(positions[p]);
                    slot_keys.push(Some(key));
                    (out_positions.len() - 1) as u32
                }
            });
        }
        faces.push(face);
    }

    let mut mesh = TriangleMesh::new(name, out_positions, faces)?;
    if use_uv {
        let vertex_uvs = slot_keys
            .iter()
            .map(|k| k.and_then(|k| k.1).map_or([0.0, 0.0], |i| uvs[i as usize]))
            .collect();
        mesh = mesh.with_uvs(vertex_uvs)?;
    }
    if use_normal {
        let vertex_normals = slot_keys
            .iter()
            .map(|k| {
                k.and_then(|k| k.2)
                    .map(|i| normals[i as usize])
                    .and_then(|n| n.try_normalize(0.0))
                    .unwrap_or(ISOLATED_NORMAL)
            })
            .collect();
        mesh = mesh.with_normals(vertex_normals)?;
    }
    Ok(mesh.with_texture_ref(mtllib.or(usemtl)))
}

fn parse_floats<'a, const N: usize>(
    tokens: &mut impl Iterator<Item = &'a str>,
    line: usize,
    keyword: &str,
) -> Result<[f64; N], MeshError> {
    let mut out = [0.0; N];
    for slot in out.iter_mut() {
        let token = tokens.next().ok_or_else(|| {
            MeshError::parse(line, format!("`{keyword}` needs {N} coordinates"))
        })?;
        *slot = token
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| MeshError::parse(line, format!("invalid number `{token}`")))?;
    }
    Ok(out)
}

/// Resolves a 1-based (or negative, relative) OBJ index.
fn resolve_index(token: &str, count: usize, line: usize) -> Result<u32, MeshError> {
    let raw: i64 = token
        .parse()
        .map_err(|_| MeshError::parse(line, format!("invalid index `{token}`")))?;
    let resolved = match raw {
        0 => return Err(MeshError::parse(line, "index 0 is not valid in OBJ")),
        r if r > 0 => r - 1,
        r => count as i64 + r,
    };
    if resolved < 0 {
        return Err(MeshError::parse(
            line,
            format!("relative index `{token}` points before the first element"),
        ));
    }
    u32::try_from(resolved).map_err(|_| MeshError::parse(line, format!("index `{token}` too large")))
}

fn parse_corner(
    token: &str,
    line: usize,
    face: usize,
    position_count: usize,
    uv_count: usize,
    normal_count: usize,
) -> Result<Corner, MeshError> {
    let mut parts = token.split('/');
    let position = resolve_index(parts.next().unwrap_or(""), position_count, line)?;
    if position as usize >= position_count {
        return Err(MeshError::Index {
            face,
            index: position as usize,
            vertex_count: position_count,
        });
    }
    let uv = match parts.next() {
        Some("") | None => None,
        Some(t) => Some(resolve_index(t, uv_count, line)?),
    };
    let normal = match parts.next() {
        Some("") | None => None,
        Some(t) => Some(resolve_index(t, normal_count, line)?),
    };
    if parts.next().is_some() {
        return Err(MeshError::parse(line, format!("malformed face corner `{token}`")));
    }
    if uv.is_some_and(|i| i as usize >= uv_count) {
        return Err(MeshError::parse(line, format!("texture index in `{token}` out of range")));
    }
    if normal.is_some_and(|i| i as usize >= normal_count) {
        return Err(MeshError::parse(line, format!("normal index in `{token}` out of range")));
    }
    Ok(Corner {
        position,
        uv,
        normal,
    })
}

/// Formats a coordinate with at most 9 significant digits.
fn format_coordinate(value: f64) -> String {
    let rounded: f64 = format!("{value:.8e}").parse().unwrap_or(value);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

/// Serializes positions and faces as OBJ text.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(mesh.vertex_count() * 32 + mesh.face_count() * 24);
    for p in mesh.positions() {
        let _ = writeln!(
            out,
            "v {} {} {}",
            format_coordinate(p.x),
            format_coordinate(p.y),
            format_coordinate(p.z)
        );
    }
    for [a, b, c] in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out
}

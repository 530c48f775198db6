//! Indexed triangle meshes and the geometric primitives the rest of the
//! crate builds on.
//!
//! A [`TriangleMesh`] is validated on construction and immutable afterwards,
//! so it can be shared freely between threads.

mod obj;
mod ply;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::{Point3, Vector3};

pub use obj::{parse_obj, write_obj};
pub use ply::parse_ply;

/// Normal assigned to vertices that no non-degenerate face touches.
pub const ISOLATED_NORMAL: Vector3 = Vector3::new(0.0, 0.0, 1.0);

const NORMAL_LENGTH_TOLERANCE: f64 = 1e-6;

/// Supported mesh file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    /// Guesses the format from a file name extension.
    pub fn from_extension(name: &str) -> Option<Self> {
        let ext = Path::new(name).extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }

    /// Guesses the format from the leading bytes. PLY files always start
    /// with the `ply` magic line; anything else is treated as OBJ text.
    pub fn sniff(bytes: &[u8]) -> Self {
        if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
            Self::Ply
        } else {
            Self::Obj
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Self::Obj => "obj",
            Self::Ply => "ply",
        }
    }
}

impl std::str::FromStr for MeshFormat {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(Self::Obj),
            "ply" => Ok(Self::Ply),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

impl std::fmt::Display for MeshFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.extension())
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// The empty box: `min` is +inf and `max` is -inf so that any growth
    /// replaces both.
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut aabb = Self::empty();
        for p in points {
            aabb.grow(p);
        }
        aabb
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    /// Length of the main diagonal; zero for a point-like box.
    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.extent().norm()
        }
    }

    /// Index of the axis with the largest extent (ties resolve to the lower axis).
    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }
}

/// An indexed triangle mesh with optional per-vertex attributes.
///
/// Invariants (checked by every constructor):
/// - at least one face, and every face index is below the vertex count
/// - normals, when present, match the vertex count and have unit length
/// - uvs, when present, match the vertex count
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    name: String,
    positions: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    normals: Option<Vec<Vector3>>,
    uvs: Option<Vec<[f64; 2]>>,
    texture_ref: Option<String>,
}

impl TriangleMesh {
    pub fn new(
        name: impl Into<String>,
        positions: Vec<Point3>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let vertex_count = positions.len();
        for (face, tri) in faces.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i as usize >= vertex_count) {
                return Err(MeshError::Index {
                    face,
                    index: index as usize,
                    vertex_count,
                });
            }
        }
        if let Some(i) = positions.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinite { vertex: i });
        }
        Ok(Self {
            name: name.into(),
            positions,
            faces,
            normals: None,
            uvs: None,
            texture_ref: None,
        })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3>) -> Result<Self, MeshError> {
        if normals.len() != self.positions.len() {
            return Err(MeshError::AttributeCount {
                attribute: "normals",
                expected: self.positions.len(),
                found: normals.len(),
            });
        }
        if let Some(vertex) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > NORMAL_LENGTH_TOLERANCE)
        {
            return Err(MeshError::NonUnitNormal { vertex });
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_uvs(mut self, uvs: Vec<[f64; 2]>) -> Result<Self, MeshError> {
        if uvs.len() != self.positions.len() {
            return Err(MeshError::AttributeCount {
                attribute: "uvs",
                expected: self.positions.len(),
                found: uvs.len(),
            });
        }
        self.uvs = Some(uvs);
        Ok(self)
    }

    pub fn with_texture_ref(mut self, texture_ref: Option<String>) -> Self {
        self.texture_ref = texture_ref;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vector3]> {
        self.normals.as_deref()
    }

    pub fn uvs(&self) -> Option<&[[f64; 2]]> {
        self.uvs.as_deref()
    }

    pub fn texture_ref(&self) -> Option<&str> {
        self.texture_ref.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// The three corner positions of a face.
    #[inline]
    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    #[inline]
    pub fn centroid(&self, face: usize) -> Point3 {
        let [a, b, c] = self.triangle(face);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Unnormalized face normal; its length is twice the face area.
    #[inline]
    pub fn face_normal_scaled(&self, face: usize) -> Vector3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    /// Returns a copy with area-weighted per-vertex normals.
    pub fn compute_vertex_normals(&self) -> TriangleMesh {
        let mut mesh = self.clone();
        mesh.normals = Some(vertex_normals(self));
        mesh
    }

    /// Returns `self` if it already carries normals, otherwise a copy with
    /// computed normals.
    pub fn ensure_normals(&self) -> std::borrow::Cow<'_, TriangleMesh> {
        if self.normals.is_some() {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.compute_vertex_normals())
        }
    }

    /// Componentwise bounds over the vertices referenced by faces.
    pub fn bounding_box(&self) -> Aabb {
        let mut aabb = Aabb::empty();
        for tri in &self.faces {
            for &i in tri {
                aabb.grow(&self.positions[i as usize]);
            }
        }
        aabb
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len())
            .map(|f| self.face_normal_scaled(f).norm() * 0.5)
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Sorted neighbor lists induced by face edges. Repeated indices within a
    /// face (collapsed triangles) never produce self-loops.
    pub fn vertex_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); self.positions.len()];
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                if u != v {
                    adjacency[u as usize].push(v);
                    adjacency[v as usize].push(u);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        adjacency
    }

    /// Union of the vertex triples of the given faces.
    pub fn face_vertices<'a>(&self, faces: impl IntoIterator<Item = &'a u32>) -> BTreeSet<u32> {
        faces
            .into_iter()
            .flat_map(|&f| self.faces[f as usize])
            .collect()
    }

    /// Returns a copy whose positions (and normals) went through `transform`.
    pub fn transformed(&self, transform: &nalgebra::Isometry3<f64>) -> TriangleMesh {
        let mut mesh = self.clone();
        for p in &mut mesh.positions {
            *p = transform * *p;
        }
        if let Some(normals) = &mut mesh.normals {
            for n in normals {
                *n = transform * *n;
            }
        }
        mesh
    }
}

/// Normalized area-weighted sum of incident face normals per vertex.
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vector3> {
    let mut sums = vec![Vector3::zeros(); mesh.vertex_count()];
    for (f, tri) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal_scaled(f);
        for &i in tri {
            sums[i as usize] += n;
        }
    }
    sums.into_iter()
        .map(|s| {
            let len = s.norm();
            if len > 0.0 && len.is_finite() {
                s / len
            } else {
                ISOLATED_NORMAL
            }
        })
        .collect()
}

/// Parses mesh bytes in the given format.
pub fn load_mesh(
    bytes: &[u8],
    format: MeshFormat,
    name: impl Into<String>,
) -> Result<TriangleMesh, MeshError> {
    if bytes.is_empty() {
        return Err(MeshError::Parse {
            line: 0,
            message: "input is empty".into(),
        });
    }
    match format {
        MeshFormat::Obj => parse_obj(bytes, name),
        MeshFormat::Ply => parse_ply(bytes, name),
    }
}

/// Reads a mesh file, inferring the format from the extension and falling
/// back to the file's magic bytes.
pub fn load_mesh_file(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let format = MeshFormat::from_extension(&name).unwrap_or_else(|| MeshFormat::sniff(&bytes));
    load_mesh(&bytes, format, name)
}

/// Splits a polygon into a triangle fan anchored at its first corner.
pub(crate) fn fan_triangulate<T: Copy>(corners: &[T]) -> impl Iterator<Item = [T; 3]> + '_ {
    (1..corners.len().saturating_sub(1)).map(move |i| [corners[0], corners[i], corners[i + 1]])
}

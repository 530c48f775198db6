//! Screen-space region-of-interest selection.
//!
//! Both gestures decide face membership by the projected face centroid and
//! then keep only faces that pass [`SelectionTarget::face_visible`], so a
//! selection never reaches through the surface nearest to the viewer.

mod camera;
mod polygon;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bvh::{Bvh, Ray, T_TIE_EPSILON};
use crate::error::SelectionError;
use crate::mesh::TriangleMesh;

pub use camera::{CameraBasis, CameraPose, Projection, ScreenPoint};
pub use polygon::{distance_to_segment, point_in_polygon};

/// Relative tolerance between the centroid distance and the nearest hit
/// for a face to count as visible.
pub const VISIBILITY_TOLERANCE: f64 = 1e-6;

/// A set of faces on one mesh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSet {
    pub mesh_id: String,
    pub faces: BTreeSet<u32>,
}

impl SelectionSet {
    pub fn new(mesh_id: impl Into<String>, faces: impl IntoIterator<Item = u32>) -> Self {
        Self {
            mesh_id: mesh_id.into(),
            faces: faces.into_iter().collect(),
        }
    }

    pub fn empty(mesh_id: impl Into<String>) -> Self {
        Self::new(mesh_id, [])
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn contains(&self, face: u32) -> bool {
        self.faces.contains(&face)
    }

    pub fn is_subset(&self, other: &SelectionSet) -> bool {
        self.faces.is_subset(&other.faces)
    }

    /// Sorted face indices.
    pub fn to_vec(&self) -> Vec<u32> {
        self.faces.iter().copied().collect()
    }

    /// Checks every index against a mesh face count.
    pub fn check_bounds(&self, face_count: usize) -> Result<(), SelectionError> {
        match self.faces.last() {
            Some(&face) if face as usize >= face_count => {
                Err(SelectionError::FaceOutOfRange { face, face_count })
            }
            _ => Ok(()),
        }
    }

    fn same_mesh(&self, other: &SelectionSet) -> Result<(), SelectionError> {
        if self.mesh_id == other.mesh_id {
            Ok(())
        } else {
            Err(SelectionError::MeshMismatch(
                self.mesh_id.clone(),
                other.mesh_id.clone(),
            ))
        }
    }

    pub fn union(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.same_mesh(other)?;
        Ok(Self::new(
            self.mesh_id.clone(),
            self.faces.union(&other.faces).copied(),
        ))
    }

    pub fn difference(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.same_mesh(other)?;
        Ok(Self::new(
            self.mesh_id.clone(),
            self.faces.difference(&other.faces).copied(),
        ))
    }

    pub fn intersect(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.same_mesh(other)?;
        Ok(Self::new(
            self.mesh_id.clone(),
            self.faces.intersection(&other.faces).copied(),
        ))
    }
}

/// A painted stroke: the footprint is every screen point within `radius`
/// (NDC units) of the polyline through `samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrushStroke {
    pub samples: Vec<ScreenPoint>,
    pub radius: f64,
}

impl BrushStroke {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.samples.is_empty() {
            return Err(SelectionError::InvalidStroke("stroke has no samples".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(SelectionError::InvalidStroke(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if let Some(p) = self.samples.iter().find(|p| !p.in_viewport()) {
            return Err(SelectionError::InvalidStroke(format!(
                "sample ({}, {}) lies outside [-1, 1]^2",
                p.x, p.y
            )));
        }
        Ok(())
    }

    /// Shortest distance from `p` to the stroke polyline.
    pub fn distance(&self, p: &ScreenPoint) -> f64 {
        if self.samples.len() == 1 {
            return p.distance(&self.samples[0]);
        }
        self.samples
            .windows(2)
            .map(|w| distance_to_segment(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A closed free-form outline; self-intersections follow the even-odd rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPolygon {
    pub vertices: Vec<ScreenPoint>,
}

impl LassoPolygon {
    /// The polygon covering the whole viewport.
    pub fn full_viewport() -> Self {
        Self {
            vertices: vec![
                ScreenPoint::new(-1.0, -1.0),
                ScreenPoint::new(1.0, -1.0),
                ScreenPoint::new(1.0, 1.0),
                ScreenPoint::new(-1.0, 1.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.vertices.len() < 3 {
            return Err(SelectionError::InvalidPolygon(format!(
                "polygon has {} vertices, need at least 3",
                self.vertices.len()
            )));
        }
        if let Some(p) = self.vertices.iter().find(|p| !p.in_viewport()) {
            return Err(SelectionError::InvalidPolygon(format!(
                "vertex ({}, {}) lies outside [-1, 1]^2",
                p.x, p.y
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ScreenPoint) -> bool {
        point_in_polygon(&self.vertices, p)
    }
}

/// A selection request: camera plus one gesture. This is also the gesture
/// file format read by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Gesture {
    Brush {
        camera: CameraPose,
        stroke: BrushStroke,
    },
    Lasso {
        camera: CameraPose,
        polygon: LassoPolygon,
    },
}

impl Gesture {
    pub fn camera(&self) -> &CameraPose {
        match self {
            Gesture::Brush { camera, .. } | Gesture::Lasso { camera, .. } => camera,
        }
    }
}

/// A mesh and its BVH, addressed by the id recorded in selections.
#[derive(Debug, Clone, Copy)]
pub struct SelectionTarget<'a> {
    pub mesh_id: &'a str,
    pub mesh: &'a TriangleMesh,
    pub bvh: &'a Bvh,
}

impl<'a> SelectionTarget<'a> {
    pub fn new(mesh_id: &'a str, mesh: &'a TriangleMesh, bvh: &'a Bvh) -> Self {
        Self { mesh_id, mesh, bvh }
    }

    /// A face is visible when the nearest hit on the ray from the eye to its
    /// centroid is the face itself, or lies at the centroid distance within
    /// [`VISIBILITY_TOLERANCE`] (relative).
    pub fn face_visible(&self, camera: &CameraPose, face: u32) -> bool {
        let centroid = self.mesh.centroid(face as usize);
        let distance = (centroid - camera.eye).norm();
        let Some(ray) = Ray::towards(camera.eye, centroid) else {
            return false;
        };
        // Hits beyond this bound cannot change the outcome.
        let bound = distance * (1.0 + VISIBILITY_TOLERANCE) + 2.0 * T_TIE_EPSILON;
        match self.bvh.raycast_nearest_within(self.mesh, &ray, bound) {
            Some(hit) => {
                hit.face == face || (hit.t - distance).abs() <= VISIBILITY_TOLERANCE * distance
            }
            None => false,
        }
    }

    /// Faces whose projected centroid lies within the stroke footprint and
    /// that are visible, plus the visible face under each stroke sample.
    pub fn brush_select(
        &self,
        camera: &CameraPose,
        stroke: &BrushStroke,
    ) -> Result<SelectionSet, SelectionError> {
        camera.validate()?;
        stroke.validate()?;
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &stroke.samples {
            lo_x = lo_x.min(p.x - stroke.radius);
            lo_y = lo_y.min(p.y - stroke.radius);
            hi_x = hi_x.max(p.x + stroke.radius);
            hi_y = hi_y.max(p.y + stroke.radius);
        }
        let basis = camera.basis();
        let tan = (camera.vfov * 0.5).tan();
        let mut faces = BTreeSet::new();
        for face in 0..self.mesh.face_count() {
            let Some(proj) = camera.project_with(&basis, tan, &self.mesh.centroid(face)) else {
                continue;
            };
            let p = proj.point;
            if p.x < lo_x || p.x > hi_x || p.y < lo_y || p.y > hi_y {
                continue;
            }
            if stroke.distance(&p) <= stroke.radius && self.face_visible(camera, face as u32) {
                faces.insert(face as u32);
            }
        }
        for sample in &stroke.samples {
            let ray = camera.pick_ray(*sample);
            if let Some(hit) = self.bvh.raycast_nearest(self.mesh, &ray) {
                if !faces.contains(&hit.face) && self.face_visible(camera, hit.face) {
                    faces.insert(hit.face);
                }
            }
        }
        Ok(SelectionSet {
            mesh_id: self.mesh_id.to_string(),
            faces,
        })
    }

    /// Visible faces whose projected centroid is inside the polygon.
    pub fn lasso_select(
        &self,
        camera: &CameraPose,
        polygon: &LassoPolygon,
    ) -> Result<SelectionSet, SelectionError> {
        camera.validate()?;
        polygon.validate()?;
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in &polygon.vertices {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
            hi_x = hi_x.max(p.x);
            hi_y = hi_y.max(p.y);
        }
        let basis = camera.basis();
        let tan = (camera.vfov * 0.5).tan();
        let mut faces = BTreeSet::new();
        for face in 0..self.mesh.face_count() {
            let Some(proj) = camera.project_with(&basis, tan, &self.mesh.centroid(face)) else {
                continue;
            };
            let p = proj.point;
            if p.x < lo_x || p.x > hi_x || p.y < lo_y || p.y > hi_y {
                continue;
            }
            if polygon.contains(&p) && self.face_visible(camera, face as u32) {
                faces.insert(face as u32);
            }
        }
        Ok(SelectionSet {
            mesh_id: self.mesh_id.to_string(),
            faces,
        })
    }

    pub fn select(&self, gesture: &Gesture) -> Result<SelectionSet, SelectionError> {
        match gesture {
            Gesture::Brush { camera, stroke } => self.brush_select(camera, stroke),
            Gesture::Lasso { camera, polygon } => self.lasso_select(camera, polygon),
        }
    }
}

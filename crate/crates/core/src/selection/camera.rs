use serde::{Deserialize, Serialize};

use crate::bvh::Ray;
use crate::error::SelectionError;
use crate::{Point3, Vector3};

/// Pinhole camera. `look_dir` and `up` need not be unit or orthogonal on
/// input; [`CameraPose::basis`] orthonormalizes them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub eye: Point3,
    pub look_dir: Vector3,
    pub up: Vector3,
    /// Vertical field of view in radians, in `(0, pi)`.
    pub vfov: f64,
    /// Viewport width / height.
    pub aspect: f64,
    pub near: f64,
    pub far: f64,
}

/// Orthonormal camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub forward: Vector3,
    pub right: Vector3,
    pub up: Vector3,
}

/// Normalized device coordinates (x right, y up). Gesture input is confined
/// to `[-1, 1]^2`; projections may fall outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
}

impl ScreenPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn in_viewport(&self) -> bool {
        self.x.abs() <= 1.0 && self.y.abs() <= 1.0
    }

    pub fn distance(&self, other: &ScreenPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for ScreenPoint {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<ScreenPoint> for [f64; 2] {
    fn from(p: ScreenPoint) -> Self {
        [p.x, p.y]
    }
}

/// A point projected to the screen together with its eye-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: ScreenPoint,
    pub depth: f64,
}

impl CameraPose {
    /// Camera at `eye` looking at `target`.
    pub fn looking_at(eye: Point3, target: Point3, up: Vector3, vfov: f64, aspect: f64) -> Self {
        let distance = (target - eye).norm();
        Self {
            eye,
            look_dir: target - eye,
            up,
            vfov,
            aspect,
            near: (distance * 1e-3).max(1e-6),
            far: distance * 1e3 + 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let finite = self.eye.coords.iter().all(|c| c.is_finite())
            && self.look_dir.iter().all(|c| c.is_finite())
            && self.up.iter().all(|c| c.is_finite());
        if !finite {
            return Err(SelectionError::InvalidCamera("non-finite pose".into()));
        }
        if !(self.vfov > 0.0 && self.vfov < std::f64::consts::PI) {
            return Err(SelectionError::InvalidCamera(format!(
                "vfov {} outside (0, pi)",
                self.vfov
            )));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(SelectionError::InvalidCamera(format!(
                "aspect {} must be positive",
                self.aspect
            )));
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(SelectionError::InvalidCamera(format!(
                "clip range [{}, {}] must satisfy 0 < near < far",
                self.near, self.far
            )));
        }
        let forward = self
            .look_dir
            .try_normalize(0.0)
            .ok_or_else(|| SelectionError::InvalidCamera("zero look direction".into()))?;
        if forward.cross(&self.up).norm() <= 1e-9 * self.up.norm() {
            return Err(SelectionError::InvalidCamera(
                "up vector is parallel to the look direction".into(),
            ));
        }
        Ok(())
    }

    /// Orthonormal frame; `up` is re-orthogonalized against `look_dir`.
    /// Assumes a validated camera.
    pub fn basis(&self) -> CameraBasis {
        let forward = self.look_dir.normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        CameraBasis { forward, right, up }
    }

    fn tan_half_fov(&self) -> f64 {
        (self.vfov * 0.5).tan()
    }

    /// Ray from the eye through the near-plane point at NDC `p`.
    pub fn pick_ray(&self, p: ScreenPoint) -> Ray {
        let basis = self.basis();
        let tan = self.tan_half_fov();
        let dir = basis.forward + basis.right * (p.x * tan * self.aspect) + basis.up * (p.y * tan);
        Ray::new(self.eye, dir).expect("forward component keeps the direction non-zero")
    }

    /// Perspective projection to NDC. `None` when `q` is in front of the
    /// near plane (including behind the eye).
    pub fn project_point(&self, q: &Point3) -> Option<Projection> {
        self.project_with(&self.basis(), self.tan_half_fov(), q)
    }

    #[inline]
    pub(crate) fn project_with(&self, basis: &CameraBasis, tan: f64, q: &Point3) -> Option<Projection> {
        let d = q - self.eye;
        let depth = d.dot(&basis.forward);
        if !(depth >= self.near) {
            return None;
        }
        let x = d.dot(&basis.right) / (depth * tan * self.aspect);
        let y = d.dot(&basis.up) / (depth * tan);
        Some(Projection {
            point: ScreenPoint::new(x, y),
            depth,
        })
    }

    /// Applies a rigid transform to the pose.
    pub fn transformed(&self, transform: &nalgebra::Isometry3<f64>) -> CameraPose {
        CameraPose {
            eye: transform * self.eye,
            look_dir: transform * self.look_dir,
            up: transform * self.up,
            ..*self
        }
    }
}

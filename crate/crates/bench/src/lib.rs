//! Fixtures shared by the benchmarks.

use meshnote_core::shapes::icosphere;
use meshnote_core::{CameraPose, Point3, Ray, TriangleMesh, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit icosphere with `20 * 4^level` faces.
pub fn sphere(level: u32) -> TriangleMesh {
    icosphere(1.0, level)
}

/// Rays from a shell around the mesh toward random points of its bounding box.
/// About half of them hit.
pub fn rays(mesh: &TriangleMesh, count: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = mesh.bounding_box();
    let (center, radius, extent) = (b.center(), 0.5 * b.diagonal(), b.extent());
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let norm = dir.norm();
        if !(1e-3..=1.0).contains(&norm) {
            continue;
        }
        let origin = center + dir / norm * radius * rng.random_range(1.2..3.0);
        let target = Point3::new(
            b.min.x + extent.x * rng.random_range(0.0..1.0),
            b.min.y + extent.y * rng.random_range(0.0..1.0),
            b.min.z + extent.z * rng.random_range(0.0..1.0),
        );
        out.extend(Ray::new(origin, target - origin));
    }
    out
}

/// Camera three radii from the origin, slightly off-axis, seeing one hemisphere.
pub fn overview_camera() -> CameraPose {
    CameraPose::looking_at(Point3::new(0.3, -0.2, 3.0), Point3::origin(), Vector3::y(), 1.0, 1.0)
}

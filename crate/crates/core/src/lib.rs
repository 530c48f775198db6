//! Surface-space annotation of triangle meshes.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: OBJ/PLY loading, validation and per-mesh geometry
//!   (normals, areas, adjacency, bounds);
//! - [`bvh`]: ray/triangle intersection and a bounding volume hierarchy;
//! - [`selection`]: camera model and screen-space brush/lasso selection with
//!   occlusion filtering;
//! - [`annotation`]: annotation records, field schemas and their Web
//!   Annotation (JSON-LD) serialization;
//! - [`detect`]: per-vertex heat maps from built-in geometric detectors or
//!   remote detector services, and thresholding into face selections.

pub mod annotation;
pub mod bvh;
pub mod detect;
pub mod error;
pub mod mesh;
pub mod selection;
pub mod shapes;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

pub use annotation::{
    AnnotationRecord, FieldKind, FieldSchema, NewAnnotation, Rgb, SchemaRegistry, Violation,
};
pub use bvh::{Bvh, Hit, Ray};
pub use detect::{DetectorDescriptor, DetectorRegistry, HeatMap};
pub use error::{AnnotationError, DetectError, MeshError, SelectionError};
pub use mesh::{load_mesh, load_mesh_file, Aabb, MeshFormat, TriangleMesh};
pub use selection::{
    BrushStroke, CameraPose, Gesture, LassoPolygon, ScreenPoint, SelectionSet,
};

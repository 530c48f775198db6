//! Detectors producing per-vertex heat maps, and thresholding of heat maps
//! into face selections.

mod curvature;
mod defect;
mod heatmap;
pub mod remote;
mod saliency;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use curvature::mean_curvature;
pub use defect::{defect_values, roughness};
pub use heatmap::{heatmap_to_selection, is_normalized, normalize, HeatMap};
pub use saliency::{default_scales, reference_length, saliency_values, DEFAULT_EPSILON, DEFAULT_SCALE_MULTIPLES};

use crate::error::DetectError;
use crate::mesh::TriangleMesh;

pub const BUILTIN_PREFIX: &str = "builtin:";
pub const SALIENCY: &str = "saliency";
pub const DEFECT: &str = "defect";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Multi-scale curvature saliency; `scales` are fractions of
/// [`reference_length`].
pub fn saliency_map(mesh_id: &str, mesh: &TriangleMesh, scales: &[f64]) -> Result<HeatMap, DetectError> {
    Ok(HeatMap {
        mesh_id: mesh_id.to_string(),
        detector: SALIENCY.to_string(),
        values: saliency_values(mesh, scales)?,
        normalized: true,
    })
}

/// Normal-deviation roughness map.
pub fn defect_map(mesh_id: &str, mesh: &TriangleMesh) -> HeatMap {
    HeatMap {
        mesh_id: mesh_id.to_string(),
        detector: DEFECT.to_string(),
        values: defect_values(mesh),
        normalized: true,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorOutput {
    #[default]
    PerVertexScalar,
}

/// A named detector: either `builtin:<name>` or an HTTP(S) endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorDescriptor {
    pub name: String,
    pub endpoint: String,
    #[serde(default)]
    pub output: DetectorOutput,
}

impl DetectorDescriptor {
    pub fn builtin(name: &str) -> Self {
        Self {
            name: name.to_string(),
            endpoint: format!("{BUILTIN_PREFIX}{name}"),
            output: DetectorOutput::PerVertexScalar,
        }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            endpoint: endpoint.into(),
            output: DetectorOutput::PerVertexScalar,
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.endpoint.starts_with(BUILTIN_PREFIX)
    }
}

/// Detectors by unique name. Lookups fall back to matching the endpoint,
/// so `builtin:saliency` resolves to the `saliency` detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRegistry {
    detectors: Vec<DetectorDescriptor>,
    timeout: Duration,
}

impl Default for DetectorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl DetectorRegistry {
    pub fn empty() -> Self {
        Self {
            detectors: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        for name in [SALIENCY, DEFECT] {
            registry
                .register(DetectorDescriptor::builtin(name))
                .expect("builtin names are distinct");
        }
        registry
    }

    pub fn register(&mut self, descriptor: DetectorDescriptor) -> Result<(), DetectError> {
        if descriptor.name.is_empty() {
            return Err(DetectError::DetectorUnknown(String::new()));
        }
        if self.detectors.iter().any(|d| d.name == descriptor.name) {
            return Err(DetectError::DuplicateDetector(descriptor.name));
        }
        let known_builtin = descriptor
            .endpoint
            .strip_prefix(BUILTIN_PREFIX)
            .map(|n| n == SALIENCY || n == DEFECT);
        let remote = descriptor.endpoint.starts_with("http://") || descriptor.endpoint.starts_with("https://");
        if known_builtin == Some(false) || (known_builtin.is_none() && !remote) {
            return Err(DetectError::DetectorUnknown(descriptor.endpoint));
        }
        self.detectors.push(descriptor);
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    pub fn get(&self, name: &str) -> Option<&DetectorDescriptor> {
        self.detectors
            .iter()
            .find(|d| d.name == name)
            .or_else(|| self.detectors.iter().find(|d| d.endpoint == name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &DetectorDescriptor> {
        self.detectors.iter()
    }

    /// Runs the detector named `name` on `mesh` and returns a normalized
    /// heat map. The map's `detector` is the registered name.
    pub fn run(&self, name: &str, mesh_id: &str, mesh: &TriangleMesh) -> Result<HeatMap, DetectError> {
        let descriptor = self
            .get(name)
            .ok_or_else(|| DetectError::DetectorUnknown(name.to_string()))?;
        let mut map = match descriptor.endpoint.strip_prefix(BUILTIN_PREFIX) {
            Some(SALIENCY) => saliency_map(mesh_id, mesh, &default_scales())?,
            Some(DEFECT) => defect_map(mesh_id, mesh),
            Some(other) => return Err(DetectError::DetectorUnknown(other.to_string())),
            None => {
                let raw = remote::call(&descriptor.name, &descriptor.endpoint, mesh_id, mesh, self.timeout)?;
                HeatMap::from_raw(mesh_id, descriptor.name.clone(), &raw)
            }
        };
        map.detector = descriptor.name.clone();
        Ok(map)
    }
}

/// Free-function form of [`DetectorRegistry::run`].
pub fn run_detector(
    registry: &DetectorRegistry,
    name: &str,
    mesh_id: &str,
    mesh: &TriangleMesh,
) -> Result<HeatMap, DetectError> {
    registry.run(name, mesh_id, mesh)
}

use serde::{Deserialize, Serialize};

use crate::error::DetectError;
use crate::mesh::TriangleMesh;
use crate::selection::SelectionSet;

/// Per-vertex scalar field produced by a detector; hotter is more
/// important.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub mesh_id: String,
    pub detector: String,
    pub values: Vec<f64>,
    pub normalized: bool,
}

/// True when `values` lie in `[0, 1]` with maximum 1 or are all zero.
pub fn is_normalized(values: &[f64]) -> bool {
    let in_range = values.iter().all(|v| (0.0..=1.0).contains(v));
    in_range && (values.contains(&1.0) || values.iter().all(|&v| v == 0.0))
}

/// Min-max normalization that leaves already-normalized maps untouched
/// and sends constant maps to all zeros. Values must be finite.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    if is_normalized(values) {
        return values.to_vec();
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

impl HeatMap {
    /// Wraps finite values, normalizing them.
    pub fn from_raw(mesh_id: impl Into<String>, detector: impl Into<String>, values: &[f64]) -> Self {
        Self {
            mesh_id: mesh_id.into(),
            detector: detector.into(),
            values: normalize(values),
            normalized: true,
        }
    }

    /// Checks the normalized-map invariants against a mesh.
    pub fn check(&self, mesh_id: &str, mesh: &TriangleMesh) -> Result<(), DetectError> {
        if self.mesh_id != mesh_id {
            return Err(DetectError::MeshMismatch {
                heatmap: self.mesh_id.clone(),
                mesh: mesh_id.to_string(),
            });
        }
        if self.values.len() != mesh.vertex_count() {
            return Err(DetectError::LengthMismatch {
                expected: mesh.vertex_count(),
                found: self.values.len(),
            });
        }
        if !self.normalized || !is_normalized(&self.values) {
            return Err(DetectError::NotNormalized);
        }
        Ok(())
    }
}

/// Faces whose mean vertex value reaches `threshold`.
pub fn heatmap_to_selection(
    mesh_id: &str,
    mesh: &TriangleMesh,
    heatmap: &HeatMap,
    threshold: f64,
) -> Result<SelectionSet, DetectError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(DetectError::InvalidThreshold(threshold));
    }
    heatmap.check(mesh_id, mesh)?;
    let v = &heatmap.values;
    let faces = mesh.faces().iter().enumerate().filter_map(|(f, &[a, b, c])| {
        let mean = (v[a as usize] + v[b as usize] + v[c as usize]) / 3.0;
        (mean >= threshold).then_some(f as u32)
    });
    Ok(SelectionSet::new(mesh_id, faces))
}

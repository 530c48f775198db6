use crate::mesh::TriangleMesh;

/// Roughness spreads at or below this are treated as a uniform surface.
const UNIFORM_TOLERANCE: f64 = 1e-9;
/// Floor for the robust deviation so a majority of identical values does
/// not blow up the standardization.
const MIN_DEVIATION: f64 = 1e-9;
/// Standardized roughness is clamped at this many deviations.
const CLAMP: f64 = 3.0;
/// Scales the median absolute deviation to a normal standard deviation.
const MAD_SCALE: f64 = 1.4826;

/// Per-vertex roughness: one minus the mean cosine between the vertex
/// normal and the normals of its one-ring neighbors. Vertices without
/// neighbors get 0.
pub fn roughness(mesh: &TriangleMesh) -> Vec<f64> {
    let with_normals = mesh.ensure_normals();
    let normals = with_normals.normals().expect("normals ensured");
    mesh.vertex_adjacency()
        .iter()
        .enumerate()
        .map(|(i, ring)| {
            if ring.is_empty() {
                return 0.0;
            }
            let sum: f64 = ring.iter().map(|&j| normals[i].dot(&normals[j as usize])).sum();
            1.0 - sum / ring.len() as f64
        })
        .collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Roughness standardized by median and MAD, clamped above at 3
/// deviations, then min-max normalized.
pub fn defect_values(mesh: &TriangleMesh) -> Vec<f64> {
    let rough = roughness(mesh);
    let (lo, hi) = rough
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    if !(hi - lo > UNIFORM_TOLERANCE) {
        return vec![0.0; rough.len()];
    }

    let mut sorted = rough.clone();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut deviations: Vec<f64> = rough.iter().map(|r| (r - med).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let scale = (MAD_SCALE * median(&deviations)).max(MIN_DEVIATION);

    let z: Vec<f64> = rough.iter().map(|r| ((r - med) / scale).min(CLAMP)).collect();
    let (zlo, zhi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if zhi - zlo <= 0.0 {
        return vec![0.0; z.len()];
    }
    z.iter().map(|v| (v - zlo) / (zhi - zlo)).collect()
}

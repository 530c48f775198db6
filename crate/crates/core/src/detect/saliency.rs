use std::collections::HashMap;

use super::curvature::mean_curvature;
use crate::error::DetectError;
use crate::mesh::TriangleMesh;

/// Base unit of the default scales, as a fraction of [`reference_length`].
pub const DEFAULT_EPSILON: f64 = 0.003;
pub const DEFAULT_SCALE_MULTIPLES: [f64; 5] = [2.0, 3.0, 4.0, 5.0, 6.0];

/// Maps whose spread times the reference length falls below this are treated as
/// constant (floating-point residue of a flat curvature field).
const FLAT_TOLERANCE: f64 = 1e-9;

const LUT_SIZE: usize = 4096;
/// Cells per kernel cutoff along each axis of the neighbor grid.
const GRID_SUBDIVISION: i64 = 6;

/// Default scales as fractions of [`reference_length`].
pub fn default_scales() -> Vec<f64> {
    DEFAULT_SCALE_MULTIPLES
        .iter()
        .map(|m| m * DEFAULT_EPSILON)
        .collect()
}

/// Truncated Gaussian `exp(-d^2 / 2 sigma^2) - exp(-2)` on `d <= 2 sigma`,
/// tabulated over `q = d^2 / (2 sigma)^2`. The shift makes the weight vanish
/// continuously at the cutoff, so neighbors crossing it under rounding
/// perturb averages only by rounding-sized amounts.
struct Kernel {
    cutoff2: f64,
    inv_cutoff2: f64,
}

/// Linear interpolation table: `(value, slope)` per interval.
struct WeightTable {
    entries: Vec<[f64; 2]>,
}

impl WeightTable {
    fn new() -> Self {
        let floor = (-2.0f64).exp();
        let at = |i: usize| {
            let q = (i as f64 / LUT_SIZE as f64).min(1.0);
            (-2.0 * q).exp() - floor
        };
        let entries = (0..=LUT_SIZE)
            .map(|i| [at(i), at(i + 1) - at(i)])
            .collect();
        Self { entries }
    }

    /// `q` in `[0, 1]`.
    #[inline(always)]
    fn weight(&self, q: f64) -> f64 {
        let x = q * LUT_SIZE as f64;
        let i = x as usize;
        let [a, slope] = self.entries[i];
        a + slope * (x - i as f64)
    }
}

/// Multi-scale center-surround saliency of the mean curvature field,
/// min-max normalized. `scales` are fractions of [`reference_length`].
pub fn saliency_values(mesh: &TriangleMesh, scales: &[f64]) -> Result<Vec<f64>, DetectError> {
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(DetectError::NoScales);
    }
    let diag = reference_length(mesh);
    if !(diag > 0.0 && diag.is_finite()) {
        return Err(DetectError::DegenerateMesh);
    }
    let bounds = mesh.bounding_box();
    let curvature = mean_curvature(mesh);

    // Distinct Gaussian widths, largest first; each scale needs sigma and 2 sigma.
    let mut sigmas: Vec<f64> = scales
        .iter()
        .flat_map(|s| [s * diag, 2.0 * s * diag])
        .collect();
    sigmas.sort_by(|a, b| b.total_cmp(a));
    sigmas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let kernel_of = |sigma: f64| {
        sigmas
            .iter()
            .position(|s| (s - sigma).abs() <= 1e-12 * s.abs())
            .expect("every width was inserted")
    };
    let kernels: Vec<Kernel> = sigmas
        .iter()
        .map(|s| {
            let cutoff2 = 4.0 * s * s;
            Kernel {
                cutoff2,
                inv_cutoff2: 1.0 / cutoff2,
            }
        })
        .collect();

    let smoothed = gaussian_averages(mesh, &curvature, &kernels, bounds.min.coords.into());

    let referenced = referenced_vertices(mesh);
    let mut sums = vec![0.0; mesh.vertex_count()];
    for &s in scales {
        let (fine, coarse) = (kernel_of(s * diag), kernel_of(2.0 * s * diag));
        for &v in &referenced {
            let g = &smoothed[v * kernels.len()..(v + 1) * kernels.len()];
            sums[v] += (g[fine] - g[coarse]).abs();
        }
    }

    let (lo, hi) = referenced
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(sums[v]), hi.max(sums[v]))
        });
    let mut out = vec![0.0; mesh.vertex_count()];
    if (hi - lo) * diag > FLAT_TOLERANCE {
        for &v in &referenced {
            out[v] = (sums[v] - lo) / (hi - lo);
        }
    }
    Ok(out)
}

/// Rotation-invariant size of the surface: `sqrt(12 tr C)` with `C` the
/// area-weighted covariance of surface points. Equals the bounding-box
/// diagonal for spheres and axis-aligned rectangles, and unlike the box
/// diagonal does not change when the mesh is rotated.
pub fn reference_length(mesh: &TriangleMesh) -> f64 {
    let pos = mesh.positions();
    let referenced = referenced_vertices(mesh);
    if referenced.is_empty() {
        return 0.0;
    }
    let origin = referenced
        .iter()
        .fold(crate::Vector3::zeros(), |acc, &v| acc + pos[v].coords)
        / referenced.len() as f64;
    let (mut area, mut first, mut second) = (0.0, crate::Vector3::zeros(), 0.0);
    for &[a, b, c] in mesh.faces() {
        let [a, b, c] = [a, b, c].map(|i| pos[i as usize].coords - origin);
        let w = 0.5 * (b - a).cross(&(c - a)).norm();
        let s = a + b + c;
        area += w;
        first += s * (w / 3.0);
        second += w / 12.0 * (a.norm_squared() + b.norm_squared() + c.norm_squared() + s.norm_squared());
    }
    if area <= 0.0 {
        return 0.0;
    }
    let mean = first / area;
    (12.0 * (second / area - mean.norm_squared())).max(0.0).sqrt()
}

fn referenced_vertices(mesh: &TriangleMesh) -> Vec<usize> {
    let mut used = vec![false; mesh.vertex_count()];
    for tri in mesh.faces() {
        for &i in tri {
            used[i as usize] = true;
        }
    }
    (0..used.len()).filter(|&i| used[i]).collect()
}

/// Weighted averages of `field` for every referenced vertex and kernel,
/// laid out vertex-major. `kernels` must be sorted by decreasing cutoff.
///
/// Vertices are bucketed into a uniform grid and every unordered pair of
/// buckets within reach is visited once; the weight is symmetric, so each
/// pair contributes to both endpoints.
fn gaussian_averages(
    mesh: &TriangleMesh,
    field: &[f64],
    kernels: &[Kernel],
    origin: [f64; 3],
) -> Vec<f64> {
    let k_count = kernels.len();
    let max_cutoff2 = kernels[0].cutoff2;
    let cell = max_cutoff2.sqrt() / GRID_SUBDIVISION as f64;
    let table = WeightTable::new();
    let cutoffs: Vec<f64> = kernels.iter().map(|k| k.cutoff2).collect();
    let inv: Vec<f64> = kernels.iter().map(|k| k.inv_cutoff2).collect();

    let cell_of = |p: &crate::Point3| {
        [
            ((p.x - origin[0]) / cell).floor() as i64,
            ((p.y - origin[1]) / cell).floor() as i64,
            ((p.z - origin[2]) / cell).floor() as i64,
        ]
    };

    // Vertices sorted by cell, stored structure-of-arrays for locality.
    let referenced = referenced_vertices(mesh);
    let positions = mesh.positions();
    let mut keyed: Vec<([i64; 3], usize)> = referenced
        .iter()
        .map(|&v| (cell_of(&positions[v]), v))
        .collect();
    keyed.sort_unstable();
    let xs: Vec<f64> = keyed.iter().map(|&(_, v)| positions[v].x).collect();
    let ys: Vec<f64> = keyed.iter().map(|&(_, v)| positions[v].y).collect();
    let zs: Vec<f64> = keyed.iter().map(|&(_, v)| positions[v].z).collect();
    let hs: Vec<f64> = keyed.iter().map(|&(_, v)| field[v]).collect();

    let mut cells: Vec<([i64; 3], usize, usize)> = Vec::new();
    for (i, &(key, _)) in keyed.iter().enumerate() {
        match cells.last_mut() {
            Some((k, _, end)) if *k == key => *end = i + 1,
            _ => cells.push((key, i, i + 1)),
        }
    }
    let lookup: HashMap<[i64; 3], (usize, usize)> =
        cells.iter().map(|&(k, s, e)| (k, (s, e))).collect();

    // Offsets whose cell boxes can hold points within the largest cutoff,
    // keeping one of each pair of opposite offsets.
    let reach = GRID_SUBDIVISION;
    let mut offsets = Vec::new();
    for dx in -reach..=reach {
        for dy in -reach..=reach {
            for dz in -reach..=reach {
                let gap = |d: i64| (d.abs() - 1).max(0) as f64;
                let min_dist2 = (gap(dx).powi(2) + gap(dy).powi(2) + gap(dz).powi(2)) * cell * cell;
                if min_dist2 <= max_cutoff2 && [dx, dy, dz] > [0, 0, 0] {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
    }

    // Per sorted vertex and kernel: numerator, denominator.
    let mut acc = vec![[0.0; 2]; keyed.len() * k_count];
    let self_weight = table.weight(0.0);
    for (q, slot) in acc.chunks_exact_mut(k_count).enumerate() {
        slot.fill([self_weight * hs[q], self_weight]);
    }

    let mut local = vec![[0.0; 2]; k_count];
    for &(key, start, end) in &cells {
        let neighbors = offsets
            .iter()
            .filter_map(|o| lookup.get(&[key[0] + o[0], key[1] + o[1], key[2] + o[2]]).copied());
        for (s, e) in std::iter::once((start, end)).chain(neighbors) {
            for q in start..end {
                // Within the own cell only pairs q < j are visited.
                let from = if s == start { q + 1 } else { s };
                if from >= e {
                    continue;
                }
                let (qx, qy, qz, qh) = (xs[q], ys[q], zs[q], hs[q]);
                local.fill([0.0; 2]);
                let others = &mut acc[from * k_count..e * k_count];
                let span = from..e;
                for ((((&x, &y), &z), &h), slot) in xs[span.clone()]
                    .iter()
                    .zip(&ys[span.clone()])
                    .zip(&zs[span.clone()])
                    .zip(&hs[span])
                    .zip(others.chunks_exact_mut(k_count))
                {
                    let (dx, dy, dz) = (x - qx, y - qy, z - qz);
                    let d2 = dx * dx + dy * dy + dz * dz;
                    if d2 >= max_cutoff2 {
                        continue;
                    }
                    for (((l, j), &c), &i) in local.iter_mut().zip(slot.iter_mut()).zip(&cutoffs).zip(&inv) {
                        if d2 >= c {
                            break;
                        }
                        let w = table.weight(d2 * i);
                        l[0] += w * h;
                        l[1] += w;
                        j[0] += w * qh;
                        j[1] += w;
                    }
                }
                for (a, l) in acc[q * k_count..(q + 1) * k_count].iter_mut().zip(&local) {
                    a[0] += l[0];
                    a[1] += l[1];
                }
            }
        }
    }

    let mut out = vec![0.0; mesh.vertex_count() * k_count];
    for (slot, &(_, v)) in acc.chunks_exact(k_count).zip(&keyed) {
        for (k, [num, den]) in slot.iter().enumerate() {
            // The vertex itself always contributes a positive weight.
            out[v * k_count + k] = num / den;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{grid_plane, icosphere};
    use crate::Point3;

    #[test]
    fn reference_length_matches_box_diagonal_on_simple_shapes() {
        let plate = grid_plane(4, 4, 3.0, 4.0);
        assert!((reference_length(&plate) - 5.0).abs() < 1e-12);
        let sphere = icosphere(2.0, 5);
        let diag = sphere.bounding_box().diagonal();
        assert!((reference_length(&sphere) - diag).abs() < 1e-3 * diag);
    }

    #[test]
    fn reference_length_ignores_rotation() {
        let plate = grid_plane(4, 4, 3.0, 4.0);
        let turn = nalgebra::Isometry3::new(
            crate::Vector3::new(1.0, -2.0, 0.5),
            crate::Vector3::new(0.3, 0.9, -0.4),
        );
        let moved = plate.transformed(&turn);
        assert!((reference_length(&moved) - 5.0).abs() < 1e-12);
        assert!((moved.bounding_box().diagonal() - 5.0).abs() > 0.1);
    }

    #[test]
    fn weight_table_matches_exp() {
        let table = WeightTable::new();
        let floor = (-2.0f64).exp();
        for i in 0..=1000 {
            let q = i as f64 / 1000.0;
            let exact = (-2.0 * q).exp() - floor;
            assert!((table.weight(q) - exact).abs() < 1e-7);
        }
        assert_eq!(table.weight(1.0), 0.0);
    }

    /// Direct O(n^2) evaluation of the same averages.
    fn brute_force(mesh: &TriangleMesh, field: &[f64], sigma: f64) -> Vec<f64> {
        let pos = mesh.positions();
        (0..pos.len())
            .map(|i| {
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..pos.len() {
                    let d2 = (pos[j] - pos[i]).norm_squared();
                    if d2 < 4.0 * sigma * sigma {
                        let w = (-d2 / (2.0 * sigma * sigma)).exp() - (-2.0f64).exp();
                        num += w * field[j];
                        den += w;
                    }
                }
                num / den
            })
            .collect()
    }

    #[test]
    fn grid_averages_match_brute_force() {
        let mesh = crate::shapes::icosphere(1.0, 3);
        let field: Vec<f64> = mesh.positions().iter().map(|p| p.x * p.y + p.z).collect();
        let sigmas = [0.4, 0.2, 0.1];
        let kernels: Vec<Kernel> = sigmas
            .iter()
            .map(|s| Kernel {
                cutoff2: 4.0 * s * s,
                inv_cutoff2: 1.0 / (4.0 * s * s),
            })
            .collect();
        let got = gaussian_averages(&mesh, &field, &kernels, [-1.0, -1.0, -1.0]);
        for (k, &s) in sigmas.iter().enumerate() {
            let expected = brute_force(&mesh, &field, s);
            for v in 0..mesh.vertex_count() {
                assert!((got[v * 3 + k] - expected[v]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mesh = crate::shapes::unit_cube();
        assert!(matches!(saliency_values(&mesh, &[]), Err(DetectError::NoScales)));
        assert!(matches!(saliency_values(&mesh, &[-1.0]), Err(DetectError::NoScales)));
        let point = TriangleMesh::new("p", vec![Point3::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            saliency_values(&point, &default_scales()),
            Err(DetectError::DegenerateMesh)
        ));
    }
}

use crate::mesh::TriangleMesh;
use crate::Vector3;

/// Squared-area floor below which a triangle is treated as degenerate.
const DEGENERATE_AREA2: f64 = 1e-300;

/// Per-vertex mean curvature magnitude `|Laplace(x)| / 2`.
///
/// Interior vertices use the cotangent Laplacian normalized by the mixed
/// Voronoi area. Vertices on a boundary or non-manifold edge use the
/// one-ring uniform Laplacian projected on the vertex normal and scaled by
/// the mean squared edge length, which is exact for a sphere in the limit.
/// Isolated vertices get 0.
pub fn mean_curvature(mesh: &TriangleMesh) -> Vec<f64> {
    let n = mesh.vertex_count();
    let pos = mesh.positions();
    let mut laplace = vec![Vector3::zeros(); n];
    let mut area = vec![0.0; n];

    for &[a, b, c] in mesh.faces() {
        let idx = [a as usize, b as usize, c as usize];
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            continue;
        }
        let p = idx.map(|i| pos[i]);
        let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let area2 = cross.norm_squared();
        if area2 <= DEGENERATE_AREA2 {
            continue;
        }
        let double_area = area2.sqrt();
        let tri_area = 0.5 * double_area;

        // cot[k]: cotangent of the angle at corner k.
        let mut cot = [0.0; 3];
        let mut dot = [0.0; 3];
        for k in 0..3 {
            let u = p[(k + 1) % 3] - p[k];
            let v = p[(k + 2) % 3] - p[k];
            dot[k] = u.dot(&v);
            cot[k] = dot[k] / double_area;
        }
        for k in 0..3 {
            let (i, j) = (idx[(k + 1) % 3], idx[(k + 2) % 3]);
            let e = pos[j] - pos[i];
            laplace[i] += e * cot[k];
            laplace[j] -= e * cot[k];
        }

        let obtuse = (0..3).find(|&k| dot[k] < 0.0);
        for k in 0..3 {
            let share = match obtuse {
                Some(o) if o == k => tri_area * 0.5,
                Some(_) => tri_area * 0.25,
                None => {
                    let e_next = (p[(k + 1) % 3] - p[k]).norm_squared();
                    let e_prev = (p[(k + 2) % 3] - p[k]).norm_squared();
                    // Edge k->k+1 is opposite corner k+2 and vice versa.
                    (e_next * cot[(k + 2) % 3] + e_prev * cot[(k + 1) % 3]) / 8.0
                }
            };
            area[idx[k]] += share;
        }
    }

    let irregular = irregular_vertices(mesh);
    let normals = mesh.ensure_normals();
    let normals = normals.normals().expect("normals ensured");
    let adjacency = mesh.vertex_adjacency();

    (0..n)
        .map(|i| {
            if irregular[i] {
                uniform_fallback(i, pos, &adjacency[i], &normals[i])
            } else if area[i] > 0.0 {
                laplace[i].norm() / (4.0 * area[i])
            } else {
                0.0
            }
        })
        .collect()
}

fn uniform_fallback(i: usize, pos: &[crate::Point3], ring: &[u32], normal: &Vector3) -> f64 {
    if ring.is_empty() {
        return 0.0;
    }
    let mut offset = Vector3::zeros();
    let mut h2 = 0.0;
    for &j in ring {
        let e = pos[j as usize] - pos[i];
        offset += e;
        h2 += e.norm_squared();
    }
    let count = ring.len() as f64;
    let mean_h2 = h2 / count;
    if mean_h2 <= 0.0 {
        return 0.0;
    }
    2.0 * (offset / count).dot(normal).abs() / mean_h2
}

/// Vertices touching an edge that does not have exactly two incident faces.
fn irregular_vertices(mesh: &TriangleMesh) -> Vec<bool> {
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(mesh.face_count() * 3);
    for &[a, b, c] in mesh.faces() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
    }
    edges.sort_unstable();
    let mut flags = vec![false; mesh.vertex_count()];
    let mut i = 0;
    while i < edges.len() {
        let mut j = i + 1;
        while j < edges.len() && edges[j] == edges[i] {
            j += 1;
        }
        if j - i != 2 {
            flags[edges[i].0 as usize] = true;
            flags[edges[i].1 as usize] = true;
        }
        i = j;
    }
    flags
}

//! Procedural meshes used as fixtures by tests, benchmarks and the CLI.

use std::collections::HashMap;

use crate::mesh::TriangleMesh;
use crate::Point3;

/// Unit cube `[0,1]^3` as OBJ text: 8 vertices, 12 outward-facing triangles.
pub const UNIT_CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

pub fn unit_cube() -> TriangleMesh {
    crate::mesh::parse_obj(UNIT_CUBE_OBJ.as_bytes(), "unit-cube").expect("static cube is valid")
}

/// Subdivided icosahedron projected onto a sphere. Level `n` has `20 * 4^n`
/// faces.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut positions: Vec<Point3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::new(x, y, z))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
        let mut midpoint = |a: u32, b: u32, positions: &mut Vec<Point3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                positions.push(nalgebra::center(&positions[a as usize], &positions[b as usize]));
                (positions.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for p in &mut positions {
        *p = Point3::from(p.coords.normalize() * radius);
    }
    TriangleMesh::new(format!("icosphere-{subdivisions}"), positions, faces)
        .expect("icosphere is valid")
}

/// Regular `cols x rows` quad grid in the z=0 plane spanning `[0,width] x [0,height]`,
/// each quad split along alternating diagonals.
pub fn grid_plane(cols: usize, rows: usize, width: f64, height: f64) -> TriangleMesh {
    heightfield(cols, rows, width, height, |_, _| 0.0)
}

/// Like [`grid_plane`] with vertex heights `z = f(x, y)`.
pub fn heightfield(
    cols: usize,
    rows: usize,
    width: f64,
    height: f64,
    f: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    assert!(cols >= 1 && rows >= 1);
    let mut positions = Vec::with_capacity((cols + 1) * (rows + 1));
    for j in 0..=rows {
        for i in 0..=cols {
            let x = width * i as f64 / cols as f64;
            let y = height * j as f64 / rows as f64;
            positions.push(Point3::new(x, y, f(x, y)));
        }
    }
    let index = |i: usize, j: usize| (j * (cols + 1) + i) as u32;
    let mut faces = Vec::with_capacity(cols * rows * 2);
    for j in 0..rows {
        for i in 0..cols {
            let (a, b, c, d) = (index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1));
            if (i + j) % 2 == 0 {
                faces.extend([[a, b, c], [a, c, d]]);
            } else {
                faces.extend([[a, b, d], [b, c, d]]);
            }
        }
    }
    TriangleMesh::new("grid", positions, faces).expect("grid is valid")
}

/// Open cylinder around the z axis with `segments` vertices per ring and
/// `rings + 1` rings from z=0 to z=`length`. Alternate rings are rotated by
/// half a segment so the triangles are close to equilateral.
pub fn cylinder(radius: f64, length: f64, segments: usize, rings: usize) -> TriangleMesh {
    assert!(segments >= 3 && rings >= 1);
    let mut positions = Vec::with_capacity(segments * (rings + 1));
    for r in 0..=rings {
        let z = length * r as f64 / rings as f64;
        let offset = if r % 2 == 0 { 0.0 } else { 0.5 };
        for s in 0..segments {
            let theta = std::f64::consts::TAU * (s as f64 + offset) / segments as f64;
            positions.push(Point3::new(radius * theta.cos(), radius * theta.sin(), z));
        }
    }
    let index = |r: usize, s: usize| (r * segments + s % segments) as u32;
    let mut faces = Vec::with_capacity(segments * rings * 2);
    for r in 0..rings {
        for s in 0..segments {
            let (a, b) = (index(r, s), index(r, s + 1));
            let (c, d) = (index(r + 1, s), index(r + 1, s + 1));
            if r % 2 == 0 {
                // Upper ring is shifted forward by half a segment.
                faces.extend([[a, b, c], [b, d, c]]);
            } else {
                // Lower ring is shifted forward: upper vertex s+1 sits above it.
                faces.extend([[a, d, c], [a, b, d]]);
            }
        }
    }
    TriangleMesh::new("cylinder", positions, faces).expect("cylinder is valid")
}

/// Two coaxial square plates facing +z: the near one at z=0 and the far one
/// at z=`-gap`, each a `cells x cells` grid spanning `[-1,1]^2`. Face indices
/// below `2 * cells^2` belong to the near plate.
pub fn parallel_plates(cells: usize, gap: f64) -> TriangleMesh {
    let near = heightfield(cells, cells, 2.0, 2.0, |_, _| 0.0);
    let far = heightfield(cells, cells, 2.0, 2.0, |_, _| -gap);
    let offset = near.vertex_count() as u32;
    let mut positions: Vec<Point3> = near
        .positions()
        .iter()
        .chain(far.positions())
        .map(|p| Point3::new(p.x - 1.0, p.y - 1.0, p.z))
        .collect();
    positions.shrink_to_fit();
    let faces = near
        .faces()
        .iter()
        .copied()
        .chain(far.faces().iter().map(|f| f.map(|i| i + offset)))
        .collect();
    TriangleMesh::new("parallel-plates", positions, faces).expect("plates are valid")
}

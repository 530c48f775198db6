//! Rays, ray/triangle intersection and a median-split bounding volume
//! hierarchy over mesh faces.
//!
//! Numerical conventions:
//! - a triangle is hit when `|det| >= 1e-12`, `t >= 0` and the barycentric
//!   coordinates satisfy `u >= 0`, `v >= 0`, `u + v <= 1` (edges count);
//! - hits whose `t` differ by at most [`T_TIE_EPSILON`] are ties and resolve
//!   to the smaller face index.

use serde::{Deserialize, Serialize};

use crate::mesh::{Aabb, TriangleMesh};
use crate::{Point3, Vector3};

/// Determinant magnitude below which a ray counts as parallel to a triangle.
pub const PARALLEL_EPSILON: f64 = 1e-12;
/// Barycentric slack: points this far outside a triangle (in barycentric
/// units) still count as hits, which closes the gaps rounding would
/// otherwise open along shared edges.
pub const BARYCENTRIC_EPSILON: f64 = 1e-10;
/// Ray parameters closer than this are treated as the same distance.
pub const T_TIE_EPSILON: f64 = 1e-9;
/// Maximum number of faces stored in a leaf.
pub const LEAF_SIZE: usize = 8;

/// A half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Vector3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`. Returns `None` for a zero or
    /// non-finite direction.
    pub fn new(origin: Point3, direction: Vector3) -> Option<Self> {
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        Some(Self {
            origin,
            direction: direction / norm,
        })
    }

    /// Ray from `origin` towards `target`.
    pub fn towards(origin: Point3, target: Point3) -> Option<Self> {
        Self::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

/// A ray/face intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub face: u32,
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// Möller–Trumbore ray/triangle test returning `(t, u, v)`.
#[inline]
pub fn ray_triangle_intersect(
    ray: &Ray,
    v0: &Point3,
    v1: &Point3,
    v2: &Point3,
) -> Option<(f64, f64, f64)> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = ray.direction.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - v0;
    let u = s.dot(&p) * inv_det;
    if !(-BARYCENTRIC_EPSILON..=1.0 + BARYCENTRIC_EPSILON).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.dot(&q) * inv_det;
    if v < -BARYCENTRIC_EPSILON || u + v > 1.0 + BARYCENTRIC_EPSILON {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    if t < 0.0 {
        return None;
    }
    Some((t, u, v))
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// Leaf: first slot in `order`. Interior: index of the right child (the
    /// left child immediately follows its parent).
    start: u32,
    /// Number of faces for a leaf, zero for an interior node.
    count: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

/// Bounding volume hierarchy over the faces of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Read-only view of a BVH node, for inspection and invariant checks.
#[derive(Debug, Clone, Copy)]
pub enum NodeView<'a> {
    Leaf { bounds: Aabb, faces: &'a [u32] },
    Interior { bounds: Aabb, left: usize, right: usize },
}

struct Precomputed {
    centroids: Vec<[f64; 3]>,
    bounds: Vec<([f64; 3], [f64; 3])>,
}

impl Bvh {
    /// Median split on the longest centroid-extent axis; deterministic for a
    /// given mesh.
    pub fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.face_count();
        let mut pre = Precomputed {
            centroids: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
        };
        for f in 0..n {
            let [a, b, c] = mesh.triangle(f);
            pre.centroids
                .push(((a.coords + b.coords + c.coords) / 3.0).into());
            let lo = a.inf(&b).inf(&c);
            let hi = a.sup(&b).sup(&c);
            pre.bounds.push((lo.into(), hi.into()));
        }
        let root = mesh.bounding_box();
        let pad = root.diagonal() * (4.0 * BARYCENTRIC_EPSILON) + f64::MIN_POSITIVE;
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n as u32).collect(),
        };
        bvh.build_range(&pre, 0, n, pad);
        bvh
    }

    fn build_range(&mut self, pre: &Precomputed, lo: usize, hi: usize, pad: f64) -> usize {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        let mut cmin = [f64::INFINITY; 3];
        let mut cmax = [f64::NEG_INFINITY; 3];
        for &f in &self.order[lo..hi] {
            let (bmin, bmax) = pre.bounds[f as usize];
            let c = pre.centroids[f as usize];
            for k in 0..3 {
                min[k] = min[k].min(bmin[k]);
                max[k] = max[k].max(bmax[k]);
                cmin[k] = cmin[k].min(c[k]);
                cmax[k] = cmax[k].max(c[k]);
            }
        }
        for k in 0..3 {
            min[k] -= pad;
            max[k] += pad;
        }
        let index = self.nodes.len();
        let count = hi - lo;
        if count <= LEAF_SIZE {
            self.nodes.push(Node {
                min,
                max,
                start: lo as u32,
                count: count as u32,
            });
            return index;
        }
        self.nodes.push(Node {
            min,
            max,
            start: 0,
            count: 0,
        });
        let extent = [cmax[0] - cmin[0], cmax[1] - cmin[1], cmax[2] - cmin[2]];
        let axis = if extent[0] >= extent[1] && extent[0] >= extent[2] {
            0
        } else if extent[1] >= extent[2] {
            1
        } else {
            2
        };
        let mid = count / 2;
        self.order[lo..hi].select_nth_unstable_by(mid, |&a, &b| {
            pre.centroids[a as usize][axis]
                .total_cmp(&pre.centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        self.build_range(pre, lo, lo + mid, pad);
        let right = self.build_range(pre, lo + mid, hi, pad);
        self.nodes[index].start = right as u32;
        index
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn face_count(&self) -> usize {
        self.order.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.node_bounds(0)
    }

    fn node_bounds(&self, index: usize) -> Aabb {
        let node = &self.nodes[index];
        Aabb {
            min: node.min.into(),
            max: node.max.into(),
        }
    }

    pub fn node(&self, index: usize) -> NodeView<'_> {
        let node = &self.nodes[index];
        let bounds = self.node_bounds(index);
        if node.is_leaf() {
            let start = node.start as usize;
            NodeView::Leaf {
                bounds,
                faces: &self.order[start..start + node.count as usize],
            }
        } else {
            NodeView::Interior {
                bounds,
                left: index + 1,
                right: node.start as usize,
            }
        }
    }

    /// Face-index slices of all leaves in depth-first order.
    pub fn leaves(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| {
            let start = n.start as usize;
            &self.order[start..start + n.count as usize]
        })
    }

    /// Nearest hit along `ray`, ties resolved to the smaller face index.
    pub fn raycast_nearest(&self, mesh: &TriangleMesh, ray: &Ray) -> Option<Hit> {
        self.raycast_nearest_within(mesh, ray, f64::INFINITY)
    }

    /// [`Bvh::raycast_nearest`] restricted to hits with `t <= t_max`.
    pub fn raycast_nearest_within(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64) -> Option<Hit> {
        let mut best = NearestSet::new(t_max);
        self.traverse(mesh, ray, &mut best);
        best.finish()
    }

    /// Every hit along `ray`, sorted by `t` then face index.
    pub fn raycast_all(&self, mesh: &TriangleMesh, ray: &Ray) -> Vec<Hit> {
        let mut hits = AllHits(Vec::new());
        self.traverse(mesh, ray, &mut hits);
        let mut hits = hits.0;
        sort_hits(&mut hits);
        hits
    }

    fn traverse(&self, mesh: &TriangleMesh, ray: &Ray, visitor: &mut impl HitVisitor) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = [
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        ];
        let origin = [ray.origin.x, ray.origin.y, ray.origin.z];
        let dir = [ray.direction.x, ray.direction.y, ray.direction.z];
        if slab(&self.nodes[0], &origin, &dir, &inv, visitor.limit()).is_none() {
            return;
        }
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(index) = stack.pop() {
            let node = &self.nodes[index];
            if node.is_leaf() {
                let start = node.start as usize;
                for &face in &self.order[start..start + node.count as usize] {
                    let [a, b, c] = mesh.triangle(face as usize);
                    if let Some((t, u, v)) = ray_triangle_intersect(ray, &a, &b, &c) {
                        visitor.visit(Hit { face, t, u, v });
                    }
                }
                continue;
            }
            let limit = visitor.limit();
            let left = index + 1;
            let right = node.start as usize;
            let tl = slab(&self.nodes[left], &origin, &dir, &inv, limit);
            let tr = slab(&self.nodes[right], &origin, &dir, &inv, limit);
            match (tl, tr) {
                (Some(a), Some(b)) => {
                    // Nearer child on top of the stack.
                    if a <= b {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
                (Some(_), None) => stack.push(left),
                (None, Some(_)) => stack.push(right),
                (None, None) => {}
            }
        }
    }
}

trait HitVisitor {
    /// Boxes entered beyond this distance are skipped.
    fn limit(&self) -> f64;
    fn visit(&mut self, hit: Hit);
}

struct AllHits(Vec<Hit>);

impl HitVisitor for AllHits {
    fn limit(&self) -> f64 {
        f64::INFINITY
    }

    fn visit(&mut self, hit: Hit) {
        self.0.push(hit);
    }
}

/// Tracks the candidate set for the nearest-hit-with-ties rule.
struct NearestSet {
    t_max: f64,
    best_t: f64,
    candidates: Vec<Hit>,
}

impl NearestSet {
    fn new(t_max: f64) -> Self {
        Self {
            t_max,
            best_t: f64::INFINITY,
            candidates: Vec::new(),
        }
    }

    fn offer(&mut self, hit: Hit) {
        if hit.t > self.t_max || hit.t > self.best_t + T_TIE_EPSILON {
            return;
        }
        if hit.t < self.best_t {
            self.best_t = hit.t;
            let bound = self.best_t + T_TIE_EPSILON;
            self.candidates.retain(|h| h.t <= bound);
        }
        self.candidates.push(hit);
    }

    fn finish(self) -> Option<Hit> {
        self.candidates.into_iter().min_by_key(|h| h.face)
    }
}

impl HitVisitor for NearestSet {
    fn limit(&self) -> f64 {
        self.t_max.min(self.best_t + T_TIE_EPSILON)
    }

    fn visit(&mut self, hit: Hit) {
        self.offer(hit);
    }
}

/// Resolves the nearest hit from an arbitrary collection of hits using the
/// same tie rule as the BVH.
pub fn nearest_of(hits: impl IntoIterator<Item = Hit>) -> Option<Hit> {
    let mut set = NearestSet::new(f64::INFINITY);
    for hit in hits {
        set.offer(hit);
    }
    set.finish()
}

pub(crate) fn sort_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
}

const SLAB_PAD: f64 = 1.0 + 2.0 * (3.0 * f64::EPSILON * 0.5) / (1.0 - 3.0 * f64::EPSILON * 0.5);

/// Entry distance of the ray into the node box, if it enters before `limit`.
#[inline]
fn slab(node: &Node, origin: &[f64; 3], dir: &[f64; 3], inv: &[f64; 3], limit: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = limit;
    for k in 0..3 {
        if dir[k] == 0.0 {
            if origin[k] < node.min[k] || origin[k] > node.max[k] {
                return None;
            }
            continue;
        }
        let a = (node.min[k] - origin[k]) * inv[k];
        let b = (node.max[k] - origin[k]) * inv[k];
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        t0 = t0.max(near);
        t1 = t1.min(far * SLAB_PAD);
    }
    (t0 <= t1).then_some(t0)
}

//! Independent reference implementations and fixtures shared by the
//! integration tests and the acceptance suite. Nothing here calls the
//! geometric routines under test.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use meshnote_core::selection::{BrushStroke, CameraPose, LassoPolygon, ScreenPoint};
use meshnote_core::{Point3, TriangleMesh, Vector3};
use nalgebra::{Matrix3, Matrix4, Perspective3, Point4, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- rays

/// Ray/triangle hit by solving `o + t d = a + u (b - a) + v (c - a)` as a
/// 3x3 linear system. Returns `(t, u, v)` for `t >= 0`, `u, v >= 0`,
/// `u + v <= 1`.
pub fn solve_hit(origin: &Point3, dir: &Vector3, tri: [Point3; 3]) -> Option<(f64, f64, f64)> {
    let [a, b, c] = tri;
    let m = Matrix3::from_columns(&[-dir, b - a, c - a]);
    let lu = m.lu();
    let sol = lu.solve(&(origin - a))?;
    let (t, u, v) = (sol[0], sol[1], sol[2]);
    if !(t.is_finite() && u.is_finite() && v.is_finite()) {
        return None;
    }
    // Reject near-singular systems (ray parallel to the plane).
    let scale = dir.norm() * (b - a).cross(&(c - a)).norm();
    if m.determinant().abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return None;
    }
    (t >= 0.0 && u >= 0.0 && v >= 0.0 && u + v <= 1.0).then_some((t, u, v))
}

/// Linear-scan nearest hit: smallest `t`, ties within 1e-9 broken by the
/// smallest face index.
pub fn brute_nearest(mesh: &TriangleMesh, origin: &Point3, dir: &Vector3) -> Option<(u32, f64)> {
    let dir = dir.normalize();
    let mut hits = Vec::new();
    for (f, tri) in mesh.faces().iter().enumerate() {
        let p = tri.map(|i| mesh.positions()[i as usize]);
        if let Some((t, _, _)) = solve_hit(origin, &dir, p) {
            hits.push((f as u32, t));
        }
    }
    let tmin = hits.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    hits.into_iter()
        .filter(|h| h.1 <= tmin + 1e-9)
        .min_by_key(|h| h.0)
}

pub fn centroid(mesh: &TriangleMesh, face: usize) -> Point3 {
    let [a, b, c] = mesh.faces()[face].map(|i| mesh.positions()[i as usize].coords);
    Point3::from((a + b + c) / 3.0)
}

/// Visibility by linear scan: the nearest hit towards the centroid is the
/// face itself or lies at the centroid distance (relative 1e-6).
pub fn brute_visible(mesh: &TriangleMesh, eye: &Point3, face: usize) -> bool {
    let c = centroid(mesh, face);
    let d = (c - eye).norm();
    if d == 0.0 {
        return false;
    }
    match brute_nearest(mesh, eye, &(c - eye)) {
        Some((f, t)) => f as usize == face || (t - d).abs() <= 1e-6 * d,
        None => false,
    }
}

// ---------------------------------------------------------------- camera

/// Projection through the composed right-handed view and OpenGL
/// perspective matrices. Returns NDC and view depth, or `None` in front of
/// the near plane.
pub struct MatrixCamera {
    view: Matrix4<f64>,
    proj: Matrix4<f64>,
    inverse: Matrix4<f64>,
    near: f64,
    eye: Point3,
}

impl MatrixCamera {
    pub fn new(cam: &CameraPose) -> Self {
        let view = Matrix4::look_at_rh(&cam.eye, &(cam.eye + cam.look_dir), &cam.up);
        let proj = Perspective3::new(cam.aspect, cam.vfov, cam.near, cam.far).to_homogeneous();
        let inverse = (proj * view).try_inverse().expect("invertible camera");
        Self {
            view,
            proj,
            inverse,
            near: cam.near,
            eye: cam.eye,
        }
    }

    pub fn project(&self, p: &Point3) -> Option<(Vector2<f64>, f64)> {
        let v = self.view * p.to_homogeneous();
        let depth = -v.z;
        if !(depth >= self.near) {
            return None;
        }
        let c = self.proj * v;
        Some((Vector2::new(c.x / c.w, c.y / c.w), depth))
    }

    /// Direction of the pick ray through NDC `p`.
    pub fn ray_direction(&self, p: Vector2<f64>) -> Vector3 {
        let unproject = |z: f64| {
            let h = self.inverse * Point4::new(p.x, p.y, z, 1.0).coords;
            Point3::new(h.x / h.w, h.y / h.w, h.z / h.w)
        };
        (unproject(0.0) - self.eye).normalize()
    }
}

// ---------------------------------------------------------------- 2D

/// Even-odd test casting the ray towards -x.
pub fn inside_even_odd(poly: &[ScreenPoint], p: Vector2<f64>) -> bool {
    let mut crossings = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if (a.y <= p.y) == (b.y <= p.y) {
            continue;
        }
        let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if x < p.x {
            crossings += 1;
        }
    }
    crossings % 2 == 1
}

fn segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub fn stroke_distance(samples: &[ScreenPoint], p: Vector2<f64>) -> f64 {
    let v: Vec<Vector2<f64>> = samples.iter().map(|s| Vector2::new(s.x, s.y)).collect();
    if v.len() == 1 {
        return (p - v[0]).norm();
    }
    v.windows(2)
        .map(|w| segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------- selection oracles

pub fn lasso_oracle(mesh: &TriangleMesh, cam: &CameraPose, poly: &LassoPolygon) -> BTreeSet<u32> {
    let mc = MatrixCamera::new(cam);
    (0..mesh.face_count())
        .filter(|&f| {
            mc.project(&centroid(mesh, f))
                .is_some_and(|(p, _)| inside_even_odd(&poly.vertices, p))
                && brute_visible(mesh, &cam.eye, f)
        })
        .map(|f| f as u32)
        .collect()
}

/// Faces whose projected centroid lies within `radius` of the stroke, plus
/// the face picked under each sample, all subject to visibility.
pub fn brush_oracle(mesh: &TriangleMesh, cam: &CameraPose, stroke: &BrushStroke) -> BTreeSet<u32> {
    let mc = MatrixCamera::new(cam);
    let mut out: BTreeSet<u32> = (0..mesh.face_count())
        .filter(|&f| {
            mc.project(&centroid(mesh, f))
                .is_some_and(|(p, _)| stroke_distance(&stroke.samples, p) <= stroke.radius)
                && brute_visible(mesh, &cam.eye, f)
        })
        .map(|f| f as u32)
        .collect();
    for s in &stroke.samples {
        let dir = mc.ray_direction(Vector2::new(s.x, s.y));
        if let Some((f, _)) = brute_nearest(mesh, &cam.eye, &dir) {
            if brute_visible(mesh, &cam.eye, f as usize) {
                out.insert(f);
            }
        }
    }
    out
}

// ---------------------------------------------------------------- random inputs

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Camera outside a mesh centred at `center` with bounding radius `radius`,
/// looking roughly at the centre.
pub fn random_camera(rng: &mut ChaCha8Rng, center: Point3, radius: f64) -> CameraPose {
    loop {
        let eye = center + random_unit(rng) * radius * rng.random_range(2.5..5.0);
        let target = center + random_unit(rng) * radius * rng.random_range(0.0..0.4);
        let cam = CameraPose {
            eye,
            look_dir: target - eye,
            up: random_unit(rng),
            vfov: rng.random_range(0.5..1.3),
            aspect: rng.random_range(0.75..1.6),
            near: 0.01 * radius,
            far: 100.0 * radius,
        };
        if cam.validate().is_ok() {
            return cam;
        }
    }
}

pub fn random_polygon(rng: &mut ChaCha8Rng) -> LassoPolygon {
    let n = rng.random_range(3..10);
    LassoPolygon {
        vertices: (0..n)
            .map(|_| ScreenPoint::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    }
}

pub fn random_stroke(rng: &mut ChaCha8Rng, max_radius: f64) -> BrushStroke {
    let n = rng.random_range(1..7);
    let mut p = ScreenPoint::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
    let mut samples = vec![p];
    for _ in 1..n {
        p = ScreenPoint::new(
            (p.x + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0),
            (p.y + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0),
        );
        samples.push(p);
    }
    BrushStroke {
        samples,
        radius: rng.random_range(0.01..max_radius),
    }
}

/// Random triangles inside `[-1, 1]^3`.
pub fn triangle_soup(rng: &mut ChaCha8Rng, faces: usize) -> TriangleMesh {
    let mut positions = Vec::with_capacity(faces * 3);
    for _ in 0..faces {
        let c = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        for _ in 0..3 {
            positions.push(c + random_unit(rng) * rng.random_range(0.01..0.1));
        }
    }
    let tris = (0..faces as u32).map(|f| [3 * f, 3 * f + 1, 3 * f + 2]).collect();
    TriangleMesh::new("soup", positions, tris).unwrap()
}

/// Ray from outside the mesh bounds aimed at a random interior point.
pub fn random_ray(rng: &mut ChaCha8Rng, mesh: &TriangleMesh) -> (Point3, Vector3) {
    random_ray_in(rng, &mesh.bounding_box())
}

/// As [`random_ray`], for a precomputed bounding box.
pub fn random_ray_in(rng: &mut ChaCha8Rng, b: &meshnote_core::Aabb) -> (Point3, Vector3) {
    let center = b.center();
    let r = 0.5 * b.diagonal();
    let origin = center + random_unit(rng) * r * rng.random_range(1.2..3.0);
    let e = b.extent();
    let target = Point3::new(
        b.min.x + e.x * rng.random_range(0.0..1.0),
        b.min.y + e.y * rng.random_range(0.0..1.0),
        b.min.z + e.z * rng.random_range(0.0..1.0),
    );
    (origin, target - origin)
}

// ---------------------------------------------------------------- fixtures

/// Unit sphere with a smooth radial bump of height `h` and angular radius
/// `width` around +z. Returns the mesh and the vertices inside the bump.
pub fn bumpy_sphere(subdivisions: u32, h: f64, width: f64) -> (TriangleMesh, Vec<usize>) {
    let base = meshnote_core::shapes::icosphere(1.0, subdivisions);
    let mut bump = Vec::new();
    let positions: Vec<Point3> = base
        .positions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let n = p.coords.normalize();
            let angle = n.z.clamp(-1.0, 1.0).acos();
            if angle < width {
                bump.push(i);
                let s = (std::f64::consts::PI * angle / width).cos() * 0.5 + 0.5;
                Point3::from(n * (1.0 + h * s))
            } else {
                *p
            }
        })
        .collect();
    let mesh = TriangleMesh::new("bumpy", positions, base.faces().to_vec()).unwrap();
    (mesh, bump)
}

/// Regular grid with vertex `spike` lifted by `height`.
pub fn spiked_plane(cells: usize, height: f64) -> (TriangleMesh, usize) {
    let grid = meshnote_core::shapes::grid_plane(cells, cells, 1.0, 1.0);
    let spike = (cells / 2) * (cells + 1) + cells / 2;
    let mut positions = grid.positions().to_vec();
    positions[spike].z += height;
    (
        TriangleMesh::new("spiked", positions, grid.faces().to_vec()).unwrap(),
        spike,
    )
}

pub fn random_isometry(rng: &mut ChaCha8Rng) -> nalgebra::Isometry3<f64> {
    let axis = random_unit(rng);
    nalgebra::Isometry3::new(
        Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ),
        axis * rng.random_range(0.1..3.0),
    )
}

// ---------------------------------------------------------------- stub detector

/// What the stub detector answers for a request with `n` vertices.
#[derive(Clone)]
pub enum StubReply {
    Values(fn(usize) -> Vec<f64>),
    /// Raw body with the given status.
    Raw(u16, String),
    WrongLength,
    NonFinite,
    Sleep(Duration),
}

/// Single-threaded HTTP/1.1 server answering every POST per `reply`.
pub struct StubDetector {
    pub url: String,
    stop: Arc<AtomicBool>,
    handle: Option<thread::JoinHandle<()>>,
}

impl StubDetector {
    pub fn start(reply: StubReply) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/detect", listener.local_addr().unwrap());
        listener.set_nonblocking(true).unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = stop.clone();
        let handle = thread::spawn(move || {
            while !stop_flag.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        stream.set_nonblocking(false).ok();
                        let reply = reply.clone();
                        thread::spawn(move || serve(stream, reply));
                    }
                    Err(_) => thread::sleep(Duration::from_millis(5)),
                }
            }
        });
        Self {
            url,
            stop,
            handle: Some(handle),
        }
    }
}

impl Drop for StubDetector {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            h.join().ok();
        }
    }
}

fn serve(stream: TcpStream, reply: StubReply) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let n = request["mesh"]["positions"].as_array().map_or(0, |a| a.len() / 3);
    let values_body = |v: Vec<f64>| serde_json::json!({ "values": v }).to_string();
    let (status, text) = match reply {
        StubReply::Values(f) => (200, values_body(f(n))),
        StubReply::Raw(status, text) => (status, text),
        StubReply::WrongLength => (200, values_body(vec![0.0; n.saturating_sub(1)])),
        StubReply::NonFinite => {
            let mut v: Vec<String> = vec!["0.5".into(); n];
            if let Some(first) = v.first_mut() {
                *first = "NaN".into();
            }
            (200, format!("{{\"values\":[{}]}}", v.join(",")))
        }
        StubReply::Sleep(d) => {
            thread::sleep(d);
            (200, values_body(vec![0.0; n]))
        }
    };
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
        text.len()
    );
    let _ = stream.flush();
}

/// A local URL nothing is listening on.
pub fn refused_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/detect")
}

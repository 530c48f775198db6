mod support;

use std::time::Duration;

use meshnote_core::detect::{
    defect_map, default_scales, heatmap_to_selection, is_normalized, mean_curvature, saliency_map,
};
use meshnote_core::shapes::{cylinder, grid_plane, icosphere};
use meshnote_core::{DetectError, DetectorDescriptor, DetectorRegistry, TriangleMesh};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{StubDetector, StubReply};

fn mean_over(values: &[f64], ids: impl Iterator<Item = usize>) -> f64 {
    let (sum, n) = ids.fold((0.0, 0usize), |(s, n), i| (s + values[i], n + 1));
    sum / n as f64
}

#[test]
fn unit_sphere_curvature() {
    let h = mean_curvature(&icosphere(1.0, 4));
    let worst = h.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "worst relative error {worst}");
}

#[test]
fn sphere_curvature_error_shrinks_with_refinement() {
    let err = |level| {
        mean_curvature(&icosphere(1.0, level))
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max)
    };
    assert!(err(4) < err(2));
}

#[test]
fn thin_cylinder_curvature() {
    let mesh = cylinder(0.5, 2.0, 128, 64);
    let h = mean_curvature(&mesh);
    let interior: Vec<usize> = (0..mesh.vertex_count())
        .filter(|&i| (0.2..1.8).contains(&mesh.positions()[i].z))
        .collect();
    assert!(!interior.is_empty());
    for i in interior {
        assert!((h[i] - 1.0).abs() < 0.1, "vertex {i}: {}", h[i]);
    }
}

#[test]
fn flat_plane_maps_are_zero() {
    let mesh = grid_plane(30, 30, 3.0, 3.0);
    let sal = saliency_map("p", &mesh, &default_scales()).unwrap();
    let def = defect_map("p", &mesh);
    assert!(sal.values.iter().all(|&v| v == 0.0));
    assert!(def.values.iter().all(|&v| v == 0.0));
}

#[test]
fn bump_is_salient() {
    let (mesh, bump) = support::bumpy_sphere(4, 0.08, 0.35);
    let map = saliency_map("b", &mesh, &default_scales()).unwrap();
    assert!(is_normalized(&map.values));
    let inside = mean_over(&map.values, bump.iter().copied());
    let in_bump: std::collections::HashSet<usize> = bump.iter().copied().collect();
    let outside = mean_over(&map.values, (0..mesh.vertex_count()).filter(|i| !in_bump.contains(i)));
    assert!(inside > outside, "bump {inside} vs rest {outside}");
}

#[test]
fn spike_maximises_defect_within_its_ring() {
    let (mesh, spike) = support::spiked_plane(20, 0.3);
    let map = defect_map("s", &mesh);
    let max = map.values.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(max, 1.0);
    let adjacency = mesh.vertex_adjacency();
    let mut ring: Vec<usize> = adjacency[spike].iter().map(|&v| v as usize).collect();
    ring.push(spike);
    assert!(ring.iter().any(|&v| map.values[v] == max));
    // Clamping can tie distant vertices at the maximum; the raw roughness
    // peak itself must sit next to the spike.
    let raw = meshnote_core::detect::roughness(&mesh);
    let peak = (0..raw.len()).max_by(|&a, &b| raw[a].total_cmp(&raw[b])).unwrap();
    assert!(ring.contains(&peak), "roughness peak at {peak}, outside the ring of {spike}");
}

#[test]
fn detectors_are_rigid_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mesh, _) = support::bumpy_sphere(3, 0.1, 0.4);
    let sal = saliency_map("m", &mesh, &default_scales()).unwrap();
    let def = defect_map("m", &mesh);
    for _ in 0..3 {
        let moved = mesh.transformed(&support::random_isometry(&mut rng));
        let sal2 = saliency_map("m", &moved, &default_scales()).unwrap();
        let def2 = defect_map("m", &moved);
        for (a, b) in sal.values.iter().zip(&sal2.values) {
            assert!((a - b).abs() <= 1e-6, "saliency {a} vs {b}");
        }
        for (a, b) in def.values.iter().zip(&def2.values) {
            assert!((a - b).abs() <= 1e-6, "defect {a} vs {b}");
        }
    }
}

fn remote(url: &str, timeout: Duration) -> DetectorRegistry {
    let mut registry = DetectorRegistry::empty();
    registry.set_timeout(timeout);
    registry
        .register(DetectorDescriptor::remote("stub", url))
        .unwrap();
    registry
}

fn ramp(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * 10.0).collect()
}

fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

fn mesh() -> TriangleMesh {
    icosphere(1.0, 1)
}

#[test]
fn remote_success_is_normalized() {
    let stub = StubDetector::start(StubReply::Values(ramp));
    let mesh = mesh();
    let map = remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh).unwrap();
    assert_eq!(map.detector, "stub");
    assert_eq!(map.values.len(), mesh.vertex_count());
    assert!(map.normalized && is_normalized(&map.values));
    assert_eq!(map.values[0], 0.0);
    assert_eq!(*map.values.last().unwrap(), 1.0);
}

#[test]
fn remote_all_zero_echo_selects_nothing_above_zero() {
    let stub = StubDetector::start(StubReply::Values(zeros));
    let mesh = mesh();
    let map = remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh).unwrap();
    assert!(map.values.iter().all(|&v| v == 0.0));
    for t in [1e-9, 0.25, 1.0] {
        assert!(heatmap_to_selection("m", &mesh, &map, t).unwrap().is_empty());
    }
    assert_eq!(heatmap_to_selection("m", &mesh, &map, 0.0).unwrap().len(), mesh.face_count());
}

#[test]
fn remote_wrong_length_is_protocol_error() {
    let stub = StubDetector::start(StubReply::WrongLength);
    let err = remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh());
    assert!(matches!(err, Err(DetectError::ProtocolError { .. })), "{err:?}");
}

#[test]
fn remote_non_finite_is_protocol_error() {
    let stub = StubDetector::start(StubReply::NonFinite);
    let err = remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh());
    assert!(matches!(err, Err(DetectError::ProtocolError { .. })), "{err:?}");
}

#[test]
fn remote_malformed_payload_is_protocol_error() {
    let stub = StubDetector::start(StubReply::Raw(200, "{\"vals\":[]}".into()));
    let err = remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh());
    assert!(matches!(err, Err(DetectError::ProtocolError { .. })), "{err:?}");
}

#[test]
fn remote_timeout() {
    let stub = StubDetector::start(StubReply::Sleep(Duration::from_secs(3)));
    let err = remote(&stub.url, Duration::from_millis(300)).run("stub", "m", &mesh());
    assert!(matches!(err, Err(DetectError::DetectorTimeout { .. })), "{err:?}");
}

#[test]
fn remote_connection_refused() {
    let err = remote(&support::refused_url(), Duration::from_secs(5)).run("stub", "m", &mesh());
    assert!(matches!(err, Err(DetectError::DetectorUnreachable { .. })), "{err:?}");
}

#[test]
fn remote_error_status_keeps_body() {
    let stub = StubDetector::start(StubReply::Raw(503, "model warming up".into()));
    match remote(&stub.url, Duration::from_secs(10)).run("stub", "m", &mesh()) {
        Err(DetectError::DetectorUnreachable { cause, .. }) => {
            assert!(cause.contains("503") && cause.contains("model warming up"), "{cause}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

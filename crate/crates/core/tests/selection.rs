mod support;

use meshnote_core::selection::{BrushStroke, CameraPose, LassoPolygon, SelectionTarget};
use meshnote_core::shapes::{icosphere, parallel_plates, unit_cube};
use meshnote_core::{Bvh, Point3, TriangleMesh, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bounds(mesh: &TriangleMesh) -> (Point3, f64) {
    let b = mesh.bounding_box();
    (b.center(), 0.5 * b.diagonal())
}

#[test]
fn lasso_matches_oracle() {
    for (seed, mesh) in [(10, unit_cube()), (11, icosphere(1.0, 2))] {
        let bvh = Bvh::build(&mesh);
        let target = SelectionTarget::new("m", &mesh, &bvh);
        let (center, radius) = bounds(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let cam = support::random_camera(&mut rng, center, radius);
            let poly = support::random_polygon(&mut rng);
            let got = target.lasso_select(&cam, &poly).unwrap();
            assert_eq!(got.faces, support::lasso_oracle(&mesh, &cam, &poly));
        }
    }
}

#[test]
fn brush_matches_oracle() {
    for (seed, mesh) in [(12, unit_cube()), (13, icosphere(1.0, 2))] {
        let bvh = Bvh::build(&mesh);
        let target = SelectionTarget::new("m", &mesh, &bvh);
        let (center, radius) = bounds(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let cam = support::random_camera(&mut rng, center, radius);
            let stroke = support::random_stroke(&mut rng, 0.3);
            let got = target.brush_select(&cam, &stroke).unwrap();
            assert_eq!(got.faces, support::brush_oracle(&mesh, &cam, &stroke));
        }
    }
}

fn front_camera(rng: &mut ChaCha8Rng) -> CameraPose {
    let eye = Point3::new(
        rng.random_range(-0.8..0.8),
        rng.random_range(-0.8..0.8),
        rng.random_range(0.5..4.0),
    );
    let target = Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0);
    CameraPose::looking_at(eye, target, Vector3::y(), rng.random_range(0.6..1.6), 1.0)
}

#[test]
fn far_plate_is_never_selected() {
    let cells = 12;
    let mesh = parallel_plates(cells, 0.2);
    let near_faces = (2 * cells * cells) as u32;
    let bvh = Bvh::build(&mesh);
    let target = SelectionTarget::new("plates", &mesh, &bvh);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..40 {
        let cam = front_camera(&mut rng);
        let sel = if i % 2 == 0 {
            target.lasso_select(&cam, &support::random_polygon(&mut rng)).unwrap()
        } else {
            target.brush_select(&cam, &support::random_stroke(&mut rng, 0.5)).unwrap()
        };
        assert!(sel.faces.iter().all(|&f| f < near_faces), "{:?}", sel.faces);
    }
    // The full viewport reaches only the near plate.
    let cam = CameraPose::looking_at(Point3::new(0.0, 0.0, 3.0), Point3::origin(), Vector3::y(), 1.2, 1.0);
    let all = target.lasso_select(&cam, &LassoPolygon::full_viewport()).unwrap();
    assert_eq!(all.len(), near_faces as usize);
}

#[test]
fn doubling_the_radius_never_loses_faces() {
    let mesh = icosphere(1.0, 3);
    let bvh = Bvh::build(&mesh);
    let target = SelectionTarget::new("m", &mesh, &bvh);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..40 {
        let cam = support::random_camera(&mut rng, Point3::origin(), 1.0);
        let stroke = support::random_stroke(&mut rng, 0.25);
        let wide = BrushStroke {
            radius: stroke.radius * 2.0,
            ..stroke.clone()
        };
        let a = target.brush_select(&cam, &stroke).unwrap();
        let b = target.brush_select(&cam, &wide).unwrap();
        assert!(a.is_subset(&b));
    }
}

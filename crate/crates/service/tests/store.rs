mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::{cube_bytes, front_camera, TRIANGLE_OBJ};
use indexmap::IndexMap;
use meshnote_core::{DetectError, DetectorDescriptor, FieldSchema, Gesture, LassoPolygon};
use meshnote_service::store::{model_id_for, AnnotationInput, AnnotationPatch, ColorInput, StoreOptions};
use meshnote_service::{ServiceError, Store};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::Digest;
use support::{StubDetector, StubReply};

fn input(faces: Vec<u32>, title: &str) -> AnnotationInput {
    AnnotationInput {
        faces,
        title: title.into(),
        color: ColorInput::Triple([1, 2, 3]),
        description: String::new(),
        fields: IndexMap::new(),
        creator: "tester".into(),
        schema: None,
    }
}

fn cube_store() -> (tempfile::TempDir, Store, String) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let id = store.upload_model(&cube_bytes(), None, "cube.obj").unwrap().model_id;
    (dir, store, id)
}

#[test]
fn model_id_is_sha256_of_stored_bytes() {
    let (dir, store, id) = cube_store();
    let stored = std::fs::read(dir.path().join("models").join(&id).join("mesh.obj")).unwrap();
    assert_eq!(hex::encode(sha2::Sha256::digest(&stored)), id);
    assert_eq!(store.mesh_bytes(&id).unwrap(), cube_bytes());
    assert_eq!(id, model_id_for(&cube_bytes()));
}

#[test]
fn interrupted_writes_leave_only_complete_documents() {
    let (dir, store, id) = cube_store();
    let kept = store.create_annotation(&id, input(vec![0], "kept")).unwrap();
    let before = store.export(&id).unwrap();

    let attempts = Arc::new(AtomicUsize::new(0));
    let counter = attempts.clone();
    store.set_fault_hook(Some(Arc::new(move |_path: &std::path::Path| {
        counter.fetch_add(1, Ordering::SeqCst);
        Err(io::Error::other("power loss"))
    })));

    assert!(matches!(
        store.create_annotation(&id, input(vec![1], "lost")),
        Err(ServiceError::Io(_))
    ));
    let patch = AnnotationPatch {
        title: Some("renamed".into()),
        ..Default::default()
    };
    assert!(store.update_annotation(&id, &kept.id.to_string(), patch).is_err());
    let other = store.upload_model(TRIANGLE_OBJ.as_bytes(), None, "tri.obj");
    assert!(other.is_err());
    assert_eq!(attempts.load(Ordering::SeqCst), 3);

    // The running store and a reopened one both see the pre-fault state.
    assert_eq!(store.export(&id).unwrap(), before);
    assert!(store.scan().unwrap().is_empty());
    store.set_fault_hook(None);
    drop(store);
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.export(&id).unwrap(), before);
    assert_eq!(reopened.list_models().len(), 1);
    assert!(reopened.scan().unwrap().is_empty());
    let leftovers = walk(dir.path())
        .into_iter()
        .filter(|p| p.to_string_lossy().ends_with(".tmp"))
        .count();
    assert_eq!(leftovers, 0);
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn concurrent_first_selections_build_one_bvh() {
    let (_dir, store, id) = cube_store();
    let store = Arc::new(store);
    let gesture = Gesture::Lasso {
        camera: common::camera_from([3.0, 3.2, 3.4], [0.5, 0.5, 0.5]),
        polygon: LassoPolygon::full_viewport(),
    };
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let (store, id, gesture) = (store.clone(), id.clone(), gesture.clone());
            std::thread::spawn(move || store.select(&id, &gesture).unwrap())
        })
        .collect();
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(store.bvh_builds(), 1);
}

#[test]
fn random_annotations_round_trip_through_export() {
    let (_dir, store, id) = cube_store();
    let schema: FieldSchema = serde_json::from_value(serde_json::json!({
        "name": "survey",
        "version": 1,
        "entries": [{ "key": "material", "kind": "text" }],
    }))
    .unwrap();
    store.register_schema(schema.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..5 {
        let n = rng.random_range(1..12);
        let faces: Vec<u32> = (0..n).map(|_| rng.random_range(0..12)).collect();
        let mut a = input(faces, &format!("note {i} <&>"));
        a.description = format!("line\n\t{}", rng.random_range(0..1000));
        a.fields.insert("material".into(), "marble".into());
        a.schema = Some("survey".into());
        store.create_annotation(&id, a).unwrap();
    }
    let docs = store.export_documents(&id).unwrap();
    let before = store.list_annotations(&id).unwrap();

    let fresh_dir = tempfile::tempdir().unwrap();
    let fresh = Store::open(fresh_dir.path()).unwrap();
    fresh.register_schema(schema).unwrap();
    fresh.upload_model(&cube_bytes(), None, "cube.obj").unwrap();
    let summary = fresh.import(&id, &docs, false).unwrap();
    assert_eq!(summary.imported, 5);
    assert_eq!(fresh.list_annotations(&id).unwrap(), before);
    assert_eq!(fresh.export(&id).unwrap(), store.export(&id).unwrap());
}

#[test]
fn import_rejects_documents_for_other_models() {
    let (_dir, store, id) = cube_store();
    store.create_annotation(&id, input(vec![0], "a")).unwrap();
    let docs = store.export_documents(&id).unwrap();
    let tri = store.upload_model(TRIANGLE_OBJ.as_bytes(), None, "tri.obj").unwrap().model_id;
    match store.import(&tri, &docs, false) {
        Err(ServiceError::Validation(v)) => assert_eq!(v[0].path, "$.target.source"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn list_is_ordered_by_creation() {
    let (_dir, store, id) = cube_store();
    let ids: Vec<_> = (0..4)
        .map(|i| store.create_annotation(&id, input(vec![i], "n")).unwrap().id)
        .collect();
    let listed: Vec<_> = store.list_annotations(&id).unwrap().iter().map(|r| r.id).collect();
    assert_eq!(listed, ids);
}

#[test]
fn schemas_and_detectors_persist() {
    let (dir, store, _) = cube_store();
    let schema: FieldSchema = serde_json::from_value(serde_json::json!({
        "name": "material",
        "version": 2,
        "entries": [{ "key": "stone", "kind": "text" }],
    }))
    .unwrap();
    store.register_schema(schema.clone()).unwrap();
    store.register_schema(schema.clone()).unwrap();
    let mut changed = schema.clone();
    changed.entries.clear();
    assert!(matches!(store.register_schema(changed), Err(ServiceError::Conflict(_))));
    store
        .register_detector(DetectorDescriptor::remote("cracks", "http://127.0.0.1:9/detect"))
        .unwrap();
    drop(store);

    let reopened = Store::open(dir.path()).unwrap();
    assert!(reopened.schemas().contains(&schema));
    let names: Vec<_> = reopened.detectors().into_iter().map(|d| d.name).collect();
    assert_eq!(names, ["saliency", "defect", "cracks"]);
}

fn stub_store(url: &str, timeout: Duration) -> (tempfile::TempDir, Store, String) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open_with(
        dir.path(),
        StoreOptions {
            detectors_file: None,
            detector_timeout: timeout,
        },
    )
    .unwrap();
    store
        .register_detector(DetectorDescriptor::remote("stub", url))
        .unwrap();
    let id = store.upload_model(&cube_bytes(), None, "cube.obj").unwrap().model_id;
    (dir, store, id)
}

#[test]
fn remote_failures_map_to_gateway_statuses() {
    let refused = support::refused_url();
    let (_d, store, id) = stub_store(&refused, Duration::from_secs(5));
    let err = store.detect(&id, "stub", false).unwrap_err();
    assert_eq!((err.status(), err.code()), (502, "DetectorUnreachable"));

    let slow = StubDetector::start(StubReply::Sleep(Duration::from_secs(3)));
    let (_d, store, id) = stub_store(&slow.url, Duration::from_millis(300));
    let err = store.detect(&id, "stub", false).unwrap_err();
    assert_eq!((err.status(), err.code()), (504, "DetectorTimeout"));

    let short = StubDetector::start(StubReply::WrongLength);
    let (_d, store, id) = stub_store(&short.url, Duration::from_secs(5));
    let err = store.detect(&id, "stub", false).unwrap_err();
    assert!(matches!(err, ServiceError::Detect(DetectError::ProtocolError { .. })));
    assert_eq!(err.status(), 422);
}

#[test]
fn remote_results_are_cached_until_forced() {
    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }
    let stub = StubDetector::start(StubReply::Values(ramp));
    let (_d, store, id) = stub_store(&stub.url, Duration::from_secs(5));
    let first = store.detect(&id, "stub", false).unwrap();
    drop(stub);
    assert_eq!(store.detect(&id, "stub", false).unwrap(), first);
    assert!(store.detect(&id, "stub", true).is_err());
}

#[test]
fn empty_region_gesture_selects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let id = store.upload_model(TRIANGLE_OBJ.as_bytes(), None, "t.obj").unwrap().model_id;
    let gesture: Gesture = serde_json::from_value(serde_json::json!({
        "mode": "brush",
        "camera": front_camera(4.0),
        "stroke": { "samples": [[0.95, 0.95]], "radius": 0.01 },
    }))
    .unwrap();
    assert!(store.select(&id, &gesture).unwrap().is_empty());
}

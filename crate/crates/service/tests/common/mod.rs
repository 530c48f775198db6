#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use meshnote_core::shapes::UNIT_CUBE_OBJ;
use meshnote_core::{CameraPose, Point3, Vector3};
use meshnote_service::{api, Store};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const TRIANGLE_OBJ: &str = "v -1 -1 0\nv 1 -1 0\nv 0 1 0\nf 1 2 3\n";

pub fn cube_bytes() -> Vec<u8> {
    UNIT_CUBE_OBJ.as_bytes().to_vec()
}

pub fn camera_from(eye: [f64; 3], target: [f64; 3]) -> CameraPose {
    CameraPose::looking_at(
        Point3::from(eye),
        Point3::from(target),
        Vector3::z(),
        std::f64::consts::FRAC_PI_3,
        1.0,
    )
}

/// Camera on +z looking at the origin with +y up.
pub fn front_camera(distance: f64) -> CameraPose {
    CameraPose::looking_at(
        Point3::new(0.0, 0.0, distance),
        Point3::origin(),
        Vector3::y(),
        std::f64::consts::FRAC_PI_3,
        1.0,
    )
}

pub fn full_lasso(camera: &CameraPose) -> Value {
    json!({
        "camera": camera,
        "polygon": { "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]] },
    })
}

pub fn annotation(faces: &[u32], title: &str) -> Value {
    json!({
        "faces": faces,
        "title": title,
        "color": "#ff8800",
        "description": "surface loss",
        "creator": "conservator",
    })
}

pub struct TestApp {
    pub dir: tempfile::TempDir,
    pub store: Arc<Store>,
    pub app: Router,
}

impl TestApp {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        let app = api::router(store.clone());
        Self { dir, store, app }
    }

    /// Reopens the same directory as a fresh process would.
    pub fn restart(self) -> Self {
        let TestApp { dir, .. } = self;
        let store = Arc::new(Store::open(dir.path()).unwrap());
        let app = api::router(store.clone());
        Self { dir, store, app }
    }

    pub async fn call(&self, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
        let request = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.into())
            .unwrap();
        let response = self.app.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
        (status, bytes.to_vec())
    }

    pub async fn json(&self, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
        let (status, bytes) = self.call(method, uri, body.to_string()).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        let (status, bytes) = self.call("GET", uri, Body::empty()).await;
        (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
    }

    pub async fn upload(&self, bytes: Vec<u8>, name: &str) -> (StatusCode, Value) {
        let (status, body) = self
            .call("POST", &format!("/api/v1/models?name={name}"), bytes)
            .await;
        (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
    }
}

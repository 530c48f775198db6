//! HTTP client for remote detectors.
//!
//! Request: `POST <endpoint>` with
//! `{"mesh": {"positions": [x, y, z, ...], "faces": [i, j, k, ...]}, "model_id": "<id>"}`.
//! Response: status 200 with `{"values": [v0, v1, ...]}`, one finite number
//! per vertex.

use std::io::ErrorKind;
use std::time::Duration;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::Value;

use crate::error::DetectError;
use crate::mesh::TriangleMesh;

/// Upper bound on response size accepted from a detector.
const MAX_RESPONSE_BYTES: u64 = 1 << 31;
/// Bytes of an error body kept for diagnostics.
const DIAGNOSTIC_BYTES: usize = 2048;

struct FlatPositions<'a>(&'a TriangleMesh);
struct FlatFaces<'a>(&'a TriangleMesh);

impl Serialize for FlatPositions<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.vertex_count() * 3))?;
        for p in self.0.positions() {
            for c in p.coords.iter() {
                seq.serialize_element(c)?;
            }
        }
        seq.end()
    }
}

impl Serialize for FlatFaces<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.face_count() * 3))?;
        for tri in self.0.faces() {
            for i in tri {
                seq.serialize_element(i)?;
            }
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct MeshPayload<'a> {
    positions: FlatPositions<'a>,
    faces: FlatFaces<'a>,
}

#[derive(Serialize)]
struct Request<'a> {
    mesh: MeshPayload<'a>,
    model_id: &'a str,
}

/// Serialized request body for `mesh`.
pub fn request_body(model_id: &str, mesh: &TriangleMesh) -> Vec<u8> {
    serde_json::to_vec(&Request {
        mesh: MeshPayload {
            positions: FlatPositions(mesh),
            faces: FlatFaces(mesh),
        },
        model_id,
    })
    .expect("mesh payload serializes")
}

/// Extracts and validates the per-vertex values from a response body.
pub fn parse_response(name: &str, body: &str, vertex_count: usize) -> Result<Vec<f64>, DetectError> {
    let protocol = |reason: String| DetectError::ProtocolError {
        name: name.to_string(),
        reason,
    };
    let doc: Value = serde_json::from_str(body).map_err(|e| protocol(format!("invalid JSON: {e}")))?;
    let values = doc
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| protocol("response lacks a `values` array".into()))?;
    if values.len() != vertex_count {
        return Err(protocol(format!(
            "expected {vertex_count} values, got {}",
            values.len()
        )));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(protocol(format!("value {i} is not a finite number"))),
        })
        .collect()
}

fn is_timeout(err: &ureq::Error) -> bool {
    match err {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(e) => matches!(e.kind(), ErrorKind::TimedOut | ErrorKind::WouldBlock),
        _ => false,
    }
}

/// Posts `mesh` to `endpoint` and returns the raw per-vertex values.
pub fn call(
    name: &str,
    endpoint: &str,
    model_id: &str,
    mesh: &TriangleMesh,
    timeout: Duration,
) -> Result<Vec<f64>, DetectError> {
    let agent = ureq::Agent::new_with_config(
        ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build(),
    );
    let classify = |err: ureq::Error| {
        if is_timeout(&err) {
            DetectError::DetectorTimeout {
                name: name.to_string(),
                seconds: timeout.as_secs_f64(),
            }
        } else {
            DetectError::DetectorUnreachable {
                name: name.to_string(),
                cause: err.to_string(),
            }
        }
    };

    let mut response = agent
        .post(endpoint)
        .header("content-type", "application/json")
        .send(&request_body(model_id, mesh)[..])
        .map_err(classify)?;
    let status = response.status();
    let body = response
        .body_mut()
        .with_config()
        .limit(MAX_RESPONSE_BYTES)
        .read_to_string();
    if status != 200 {
        let mut text = body.unwrap_or_default();
        if text.len() > DIAGNOSTIC_BYTES {
            let cut = (0..=DIAGNOSTIC_BYTES).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
            text.truncate(cut);
        }
        return Err(DetectError::DetectorUnreachable {
            name: name.to_string(),
            cause: format!("HTTP {}: {}", status.as_u16(), text),
        });
    }
    let body = body.map_err(|e| match e {
        e if is_timeout(&e) => classify(e),
        e => DetectError::ProtocolError {
            name: name.to_string(),
            reason: format!("unreadable response: {e}"),
        },
    })?;
    parse_response(name, &body, mesh.vertex_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::unit_cube;

    #[test]
    fn request_layout() {
        let mesh = unit_cube();
        let body: Value = serde_json::from_slice(&request_body("m1", &mesh)).unwrap();
        assert_eq!(body["model_id"], "m1");
        assert_eq!(body["mesh"]["positions"].as_array().unwrap().len(), 24);
        assert_eq!(body["mesh"]["faces"].as_array().unwrap().len(), 36);
        let keys: Vec<_> = body.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["mesh", "model_id"]);
    }

    #[test]
    fn response_validation() {
        assert_eq!(parse_response("d", r#"{"values":[0,1.5]}"#, 2).unwrap(), vec![0.0, 1.5]);
        for bad in [
            r#"{"values":[0]}"#,
            r#"{"values":[0,null]}"#,
            r#"{"values":[0,"NaN"]}"#,
            r#"{"vals":[0,1]}"#,
            r#"not json"#,
            r#"{"values":[0,1e999]}"#,
        ] {
            assert!(
                matches!(parse_response("d", bad, 2), Err(DetectError::ProtocolError { .. })),
                "{bad}"
            );
        }
    }
}

//! JSON API under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use meshnote_core::detect::heatmap_to_selection;
use meshnote_core::{DetectorDescriptor, FieldSchema, Gesture, MeshFormat};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::report::render_html;
use crate::store::{
    heatmap_document, model_id_for, selection_document, AnnotationInput, AnnotationPatch, Store,
};

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 2 << 30;

type AppState = Arc<Store>;
type Params = Query<HashMap<String, String>>;

pub struct ApiError(pub ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        Self(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(self.0.to_json())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs store work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
        .map_err(ApiError)
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))
}

fn flag(params: &HashMap<String, String>, key: &str) -> bool {
    params
        .get(key)
        .is_some_and(|v| v.is_empty() || v == "1" || v.eq_ignore_ascii_case("true"))
}

pub fn router(store: Arc<Store>) -> Router {
    let api = Router::new()
        .route("/models", post(upload_model).get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/mesh", get(get_mesh))
        .route("/models/{id}/select/{mode}", post(select))
        .route("/models/{id}/annotations", get(list_annotations).post(create_annotation))
        .route("/models/{id}/annotations/export", get(export_annotations))
        .route("/models/{id}/annotations/import", post(import_annotations))
        .route(
            "/models/{id}/annotations/{aid}",
            get(get_annotation).put(update_annotation).delete(delete_annotation),
        )
        .route("/models/{id}/detect/{name}", post(detect))
        .route("/models/{id}/report", get(report))
        .route("/detectors", get(list_detectors).post(register_detector))
        .route("/schemas", get(list_schemas).post(register_schema));
    Router::new()
        .nest("/api/v1", api)
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

async fn not_found(uri: axum::http::Uri) -> ApiError {
    ApiError(ServiceError::NoRoute(uri.path().to_string()))
}

async fn upload_model(State(store): State<AppState>, Query(params): Params, body: Bytes) -> ApiResult<Response> {
    let name = params.get("name").cloned().unwrap_or_else(|| "model".into());
    let format = match params.get("format") {
        None => None,
        Some(f) => Some(
            MeshFormat::from_extension(&format!("x.{f}"))
                .ok_or_else(|| ServiceError::BadRequest(format!("unknown mesh format `{f}`")))?,
        ),
    };
    let (entry, created) = blocking(move || {
        let existed = store.model(&model_id_for(&body)).is_ok();
        Ok((store.upload_model(&body, format, &name)?, !existed))
    })
    .await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(entry)).into_response())
}

async fn list_models(State(store): State<AppState>) -> ApiResult<Response> {
    Ok(Json(store.list_models()).into_response())
}

async fn get_model(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(store.model(&id)?).into_response())
}

async fn get_mesh(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = store.model(&id)?;
    let bytes = blocking(move || store.mesh_bytes(&id)).await?;
    let disposition = format!("attachment; filename=\"mesh.{}\"", entry.format.extension());
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn select(
    State(store): State<AppState>,
    Path((id, mode)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    if mode != "brush" && mode != "lasso" {
        return Err(ServiceError::InvalidGesture(format!("unknown selection mode `{mode}`")).into());
    }
    let mut request: Value = parse_json(&body)?;
    let object = request
        .as_object_mut()
        .ok_or_else(|| ServiceError::InvalidGesture("request must be a JSON object".into()))?;
    object.insert("mode".into(), Value::from(mode.clone()));
    let gesture: Gesture =
        serde_json::from_value(request).map_err(|e| ServiceError::InvalidGesture(e.to_string()))?;
    let selection = blocking(move || store.select(&id, &gesture)).await?;
    Ok(Json(selection_document(&selection, &mode)).into_response())
}

async fn list_annotations(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || store.export_documents(&id)).await?).into_response())
}

async fn create_annotation(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let input: AnnotationInput = parse_json(&body)?;
    let record = blocking(move || store.create_annotation(&id, input)).await?;
    Ok((StatusCode::CREATED, Json(meshnote_core::annotation::to_wadm(&record))).into_response())
}

async fn get_annotation(
    State(store): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
) -> ApiResult<Response> {
    let record = blocking(move || store.annotation(&id, &aid)).await?;
    Ok(Json(meshnote_core::annotation::to_wadm(&record)).into_response())
}

async fn update_annotation(
    State(store): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let patch: AnnotationPatch = parse_json(&body)?;
    let record = blocking(move || store.update_annotation(&id, &aid, patch)).await?;
    Ok(Json(meshnote_core::annotation::to_wadm(&record)).into_response())
}

async fn delete_annotation(
    State(store): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
) -> ApiResult<Response> {
    let echo = aid.clone();
    let deleted = blocking(move || store.delete_annotation(&id, &aid)).await?;
    Ok(Json(json!({ "id": echo, "deleted": deleted })).into_response())
}

async fn export_annotations(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let text = blocking(move || store.export(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/ld+json")], text).into_response())
}

async fn import_annotations(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
    body: Bytes,
) -> ApiResult<Response> {
    let documents = match parse_json::<Value>(&body)? {
        Value::Array(docs) => docs,
        doc @ Value::Object(_) => vec![doc],
        _ => return Err(ServiceError::BadRequest("expected an array of annotations".into()).into()),
    };
    let overwrite = flag(&params, "overwrite");
    let summary = blocking(move || store.import(&id, &documents, overwrite)).await?;
    Ok(Json(summary).into_response())
}

async fn list_detectors(State(store): State<AppState>) -> ApiResult<Response> {
    Ok(Json(store.detectors()).into_response())
}

async fn register_detector(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let descriptor: DetectorDescriptor = parse_json(&body)?;
    let echo = descriptor.clone();
    blocking(move || store.register_detector(descriptor)).await?;
    Ok((StatusCode::CREATED, Json(echo)).into_response())
}

async fn detect(
    State(store): State<AppState>,
    Path((id, name)): Path<(String, String)>,
    Query(params): Params,
) -> ApiResult<Response> {
    let force = flag(&params, "force");
    let threshold = params
        .get("threshold")
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| ServiceError::BadRequest(format!("threshold `{t}` is not a number")))
        })
        .transpose()?;
    let doc = blocking(move || {
        let map = store.detect(&id, &name, force)?;
        let mut doc = heatmap_document(&map);
        if let Some(t) = threshold {
            let mesh = store.mesh(&id)?;
            let faces = heatmap_to_selection(&id, &mesh, &map, t)?;
            doc["threshold"] = json!(t);
            doc["faces"] = json!(faces.to_vec());
        }
        Ok(doc)
    })
    .await?;
    Ok(Json(doc).into_response())
}

async fn report(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
) -> ApiResult<Response> {
    let generated_at: DateTime<Utc> = match params.get("timestamp") {
        Some(t) => DateTime::parse_from_rfc3339(t)
            .map_err(|e| ServiceError::BadRequest(format!("timestamp `{t}`: {e}")))?
            .with_timezone(&Utc),
        None => Utc::now(),
    };
    let html = blocking(move || {
        let entry = store.model(&id)?;
        let mesh = store.mesh(&id)?;
        let records = store.list_annotations(&id)?;
        Ok(render_html(&entry, &mesh, &records, generated_at))
    })
    .await?;
    Ok(Html(html).into_response())
}

async fn list_schemas(State(store): State<AppState>) -> ApiResult<Response> {
    Ok(Json(store.schemas()).into_response())
}

async fn register_schema(State(store): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let schema: FieldSchema = parse_json(&body)?;
    let echo = schema.clone();
    blocking(move || store.register_schema(schema)).await?;
    Ok((StatusCode::CREATED, Json(echo)).into_response())
}

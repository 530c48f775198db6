use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use meshnote_core::annotation::to_wadm;
use meshnote_core::detect::heatmap_to_selection;
use meshnote_core::selection::SelectionTarget;
use meshnote_core::{
    load_mesh, Bvh, DetectError, DetectorDescriptor, DetectorRegistry, FieldSchema, Gesture, MeshError,
    MeshFormat, TriangleMesh,
};
use meshnote_service::report::render_html;
use meshnote_service::store::{
    heatmap_document, model_id_for, selection_document, AnnotationInput, ColorInput,
};
use meshnote_service::{ServiceConfig, ServiceError, Store};
use serde_json::{json, Value};

use crate::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: parse failures, validation, unknown ids.
    #[error("{0}")]
    Invalid(String),
    /// Filesystem, storage or network failure.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Io(_) => 2,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        let details = e.details();
        let message = if details.is_null() {
            e.to_string()
        } else {
            format!("{e}\n{}", serde_json::to_string_pretty(&details).unwrap_or_default())
        };
        match e.status() {
            500 | 502 | 504 => Self::Io(message),
            _ => Self::Invalid(message),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        ServiceError::from(e).into()
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// A mesh file with its content-derived id.
struct MeshFile {
    id: String,
    format: MeshFormat,
    mesh: TriangleMesh,
}

fn open_mesh(path: &Path) -> Result<MeshFile> {
    let bytes = read(path)?;
    let name = file_name(path);
    let format = MeshFormat::from_extension(&name).unwrap_or_else(|| MeshFormat::sniff(&bytes));
    let mesh = load_mesh(&bytes, format, &name).map_err(|e| match e {
        MeshError::Io(io) => CliError::Io(format!("{}: {io}", path.display())),
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    })?;
    Ok(MeshFile {
        id: model_id_for(&bytes),
        format,
        mesh,
    })
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn emit_json(value: &Value) -> Result<()> {
    emit(&format!("{value}\n"))
}

fn write_output(output: Option<&PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => emit(text),
    }
}

fn timeout(seconds: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(seconds)
        .map_err(|_| CliError::Invalid(format!("invalid timeout `{seconds}`")))
}

pub fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    let store = || Store::open(&cli.store).map_err(CliError::from);
    match cli.command {
        Command::Info { mesh } => info(&mesh, json),
        Command::Select { mesh, gesture } => select(&mesh, &gesture, json),
        Command::Detect {
            mesh,
            detector,
            threshold,
            detectors,
            detector_timeout,
        } => detect(&mesh, &detector, threshold, detectors.as_deref(), timeout(detector_timeout)?),
        Command::Upload { mesh, name } => {
            let bytes = read(&mesh)?;
            let name = name.unwrap_or_else(|| file_name(&mesh));
            let entry = store()?.upload_model(&bytes, None, &name)?;
            if json {
                emit_json(&json!(entry))
            } else {
                emit(&format!("{}\n", entry.model_id))
            }
        }
        Command::Models => {
            let models = store()?.list_models();
            if json {
                return emit_json(&json!(models));
            }
            let lines: String = models
                .iter()
                .map(|m| format!("{}  {:>9} faces  {}\n", m.model_id, m.face_count, m.name))
                .collect();
            emit(&lines)
        }
        Command::Annotate {
            model,
            faces,
            title,
            color,
            description,
            creator,
            schema,
            fields,
            input,
        } => {
            let input = match input {
                Some(path) => read_json(&path)?,
                None => AnnotationInput {
                    faces,
                    title,
                    color: ColorInput::Text(color),
                    description,
                    fields: parse_fields(&fields)?,
                    creator,
                    schema,
                },
            };
            let record = store()?.create_annotation(&model, input)?;
            if json {
                emit_json(&to_wadm(&record))
            } else {
                emit(&format!("{}\n", record.id))
            }
        }
        Command::Delete { model, annotation } => {
            let deleted = store()?.delete_annotation(&model, &annotation)?;
            if json {
                emit_json(&json!({ "id": annotation, "deleted": deleted }))
            } else if deleted {
                emit(&format!("deleted {annotation}\n"))
            } else {
                Err(CliError::Invalid(format!("unknown annotation `{annotation}`")))
            }
        }
        Command::Import { model, file, overwrite } => {
            let documents = match read_json::<Value>(&file)? {
                Value::Array(docs) => docs,
                doc @ Value::Object(_) => vec![doc],
                _ => return Err(CliError::Invalid("expected an array of annotations".into())),
            };
            let summary = store()?.import(&model, &documents, overwrite)?;
            if json {
                emit_json(&json!(summary))
            } else {
                emit(&format!("imported {}\n", summary.imported))
            }
        }
        Command::Export { model, output } => {
            let text = store()?.export(&model)?;
            write_output(output.as_ref(), &text)
        }
        Command::Report {
            model,
            timestamp,
            output,
        } => {
            let generated_at = match timestamp {
                Some(t) => DateTime::parse_from_rfc3339(&t)
                    .map_err(|e| CliError::Invalid(format!("timestamp `{t}`: {e}")))?
                    .with_timezone(&Utc),
                None => Utc::now(),
            };
            let store = store()?;
            let entry = store.model(&model)?;
            let mesh = store.mesh(&model)?;
            let records = store.list_annotations(&model)?;
            write_output(output.as_ref(), &render_html(&entry, &mesh, &records, generated_at))
        }
        Command::RegisterSchema { file } => {
            let schema: FieldSchema = read_json(&file)?;
            let label = format!("{}@{}", schema.name, schema.version);
            store()?.register_schema(schema)?;
            emit(&format!("registered {label}\n"))
        }
        Command::RegisterDetector { name, endpoint } => {
            store()?.register_detector(DetectorDescriptor::remote(&name, endpoint))?;
            emit(&format!("registered {name}\n"))
        }
        Command::Serve {
            listen,
            detectors,
            detector_timeout,
        } => serve(ServiceConfig {
            listen,
            store: cli.store,
            detectors_file: detectors,
            detector_timeout: timeout(detector_timeout)?,
        }),
    }
}

fn parse_fields(pairs: &[String]) -> Result<IndexMap<String, String>> {
    pairs
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CliError::Invalid(format!("field `{p}` is not KEY=VALUE")))
        })
        .collect()
}

fn info(path: &Path, json: bool) -> Result<()> {
    let MeshFile { id, format, mesh } = open_mesh(path)?;
    let b = mesh.bounding_box();
    let area = mesh.total_area();
    if json {
        return emit_json(&json!({
            "name": mesh.name(),
            "model_id": id,
            "format": format.extension(),
            "faces": mesh.face_count(),
            "vertices": mesh.vertex_count(),
            "bounding_box": { "min": [b.min.x, b.min.y, b.min.z], "max": [b.max.x, b.max.y, b.max.z] },
            "surface_area": area,
            "attributes": {
                "normals": mesh.normals().is_some(),
                "uvs": mesh.uvs().is_some(),
                "texture_ref": mesh.texture_ref(),
            },
        }));
    }
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    emit(&format!(
        "faces: {}, vertices: {}\n\
         name: {}\nmodel id: {id}\nformat: {}\n\
         bounding box: min ({}, {}, {}) max ({}, {}, {})\n\
         surface area: {area}\nnormals: {}\nuvs: {}\ntexture: {}\n",
        mesh.face_count(),
        mesh.vertex_count(),
        mesh.name(),
        format.extension(),
        b.min.x,
        b.min.y,
        b.min.z,
        b.max.x,
        b.max.y,
        b.max.z,
        yes_no(mesh.normals().is_some()),
        yes_no(mesh.uvs().is_some()),
        mesh.texture_ref().unwrap_or("none"),
    ))
}

fn select(mesh_path: &Path, gesture_path: &Path, json: bool) -> Result<()> {
    let gesture: Gesture = read_json(gesture_path)?;
    let MeshFile { id, mesh, .. } = open_mesh(mesh_path)?;
    let bvh = Bvh::build(&mesh);
    let selection = SelectionTarget::new(&id, &mesh, &bvh)
        .select(&gesture)
        .map_err(ServiceError::from)?;
    if json {
        let mode = match gesture {
            Gesture::Brush { .. } => "brush",
            Gesture::Lasso { .. } => "lasso",
        };
        return emit_json(&selection_document(&selection, mode));
    }
    let lines: String = selection.faces.iter().map(|f| format!("{f}\n")).collect();
    emit(&lines)
}

fn detect(
    mesh_path: &Path,
    name: &str,
    threshold: Option<f64>,
    detectors: Option<&Path>,
    timeout: Duration,
) -> Result<()> {
    let mut registry = DetectorRegistry::with_builtins();
    registry.set_timeout(timeout);
    if let Some(path) = detectors {
        let remote: Vec<DetectorDescriptor> = read_json(path)?;
        for descriptor in remote {
            registry.register(descriptor)?;
        }
    }
    let MeshFile { id, mesh, .. } = open_mesh(mesh_path)?;
    let map = registry.run(name, &id, &mesh)?;
    let mut doc = heatmap_document(&map);
    if let Some(t) = threshold {
        let faces = heatmap_to_selection(&id, &mesh, &map, t)?;
        doc["threshold"] = json!(t);
        doc["faces"] = json!(faces.to_vec());
    }
    emit_json(&doc)
}

fn serve(config: ServiceConfig) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime
        .block_on(meshnote_service::serve(config))
        .map_err(|e| CliError::Io(e.to_string()))
}

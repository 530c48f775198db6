//! On-disk model and annotation store.
//!
//! ```text
//! <root>/
//!   models/<id>/mesh.(obj|ply)           original upload bytes
//!   models/<id>/meta.json                ModelEntry, written last
//!   models/<id>/annotations/<uuid>.jsonld
//!   models/<id>/heatmaps/<detector>.json
//!   schemas/<name>.json                  all versions of one schema
//!   detectors.json                       remote detector descriptors
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers only ever see complete documents. Temporaries left behind by an
//! interrupted write are ignored and removed on open.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use meshnote_core::annotation::{
    create_annotation, from_wadm, now, to_canonical_string, to_wadm, validate_wadm, AnnotationEdit,
    SchemaRef, DEFAULT_SCHEMA,
};
use meshnote_core::detect::heatmap_to_selection;
use meshnote_core::{
    load_mesh, AnnotationError, AnnotationRecord, Bvh, DetectorDescriptor, DetectorRegistry,
    FieldSchema, Gesture, HeatMap, MeshFormat, NewAnnotation, Rgb, SchemaRegistry, SelectionError,
    SelectionSet, TriangleMesh,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::error::{DocumentViolation, ServiceError};

const TEMP_SUFFIX: &str = ".tmp";
const ANNOTATION_EXT: &str = "jsonld";

pub type Result<T> = std::result::Result<T, ServiceError>;

/// Called between writing a temporary file and renaming it into place.
/// Returning an error aborts the write at that point, as a crash would.
pub type FaultHook = Arc<dyn Fn(&Path) -> io::Result<()> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Metadata of a stored model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Hex SHA-256 of the stored mesh bytes.
    pub model_id: String,
    /// Source file name.
    pub name: String,
    pub format: MeshFormat,
    pub face_count: usize,
    pub vertex_count: usize,
    pub bounding_box: Bounds,
    pub texture_ref: Option<String>,
    pub uploaded_at: DateTime<Utc>,
}

/// Fields of a new annotation as submitted by a client.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationInput {
    pub faces: Vec<u32>,
    pub title: String,
    pub color: ColorInput,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub fields: IndexMap<String, String>,
    #[serde(default)]
    pub creator: String,
    /// Schema name, or `name@version`; defaults to the latest `default`.
    #[serde(default)]
    pub schema: Option<String>,
}

/// Partial update; absent members are left unchanged.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationPatch {
    pub faces: Option<Vec<u32>>,
    pub title: Option<String>,
    pub color: Option<ColorInput>,
    pub description: Option<String>,
    pub fields: Option<IndexMap<String, String>>,
    pub schema: Option<String>,
}

/// `"#rrggbb"`, `"r,g,b"`, `[r, g, b]` or `{"r":..,"g":..,"b":..}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ColorInput {
    Text(String),
    Triple([u8; 3]),
    Rgb(Rgb),
}

impl ColorInput {
    pub fn to_rgb(&self) -> Result<Rgb> {
        match self {
            Self::Text(s) => s.parse().map_err(ServiceError::BadRequest),
            Self::Triple([r, g, b]) => Ok(Rgb::new(*r, *g, *b)),
            Self::Rgb(c) => Ok(*c),
        }
    }
}

/// Outcome of an import.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportSummary {
    pub imported: usize,
    pub ids: Vec<Uuid>,
}

/// Per-model in-memory state. The mesh and its BVH are loaded on first use
/// and shared read-only afterwards.
struct ModelSlot {
    entry: ModelEntry,
    mesh: OnceLock<Arc<TriangleMesh>>,
    bvh: OnceLock<Arc<Bvh>>,
    /// Serializes annotation and heat-map mutations of this model.
    write: Mutex<()>,
}

pub struct StoreOptions {
    /// Detector registry file; defaults to `<root>/detectors.json`.
    pub detectors_file: Option<PathBuf>,
    pub detector_timeout: Duration,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            detectors_file: None,
            detector_timeout: meshnote_core::detect::DEFAULT_TIMEOUT,
        }
    }
}

pub struct Store {
    root: PathBuf,
    detectors_file: PathBuf,
    models: RwLock<BTreeMap<String, Arc<ModelSlot>>>,
    uploads: Mutex<()>,
    schemas: RwLock<SchemaRegistry>,
    detectors: RwLock<DetectorRegistry>,
    bvh_builds: AtomicUsize,
    fault: RwLock<Option<FaultHook>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn corrupt(path: &Path, message: impl ToString) -> ServiceError {
    ServiceError::Corrupt {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt(path, e))
}

fn is_temp(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with('.') && n.ends_with(TEMP_SUFFIX))
}

/// Removes temporaries left by interrupted writes anywhere under `dir`.
fn sweep_temporaries(dir: &Path) -> io::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            sweep_temporaries(&path)?;
        } else if is_temp(&path) {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

/// File-name-safe form of a detector name.
fn heatmap_file_stem(name: &str) -> String {
    if !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_'))
    {
        name.to_string()
    } else {
        format!("x-{}", hex::encode(name.as_bytes()))
    }
}

fn parse_schema_ref(label: Option<&str>) -> (String, Option<u32>) {
    match label {
        None => (DEFAULT_SCHEMA.to_string(), None),
        Some(s) => match s.rsplit_once('@') {
            Some((name, v)) if v.parse::<u32>().is_ok() => (name.to_string(), v.parse().ok()),
            _ => (s.to_string(), None),
        },
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        Self::open_with(root, StoreOptions::default())
    }

    pub fn open_with(root: impl Into<PathBuf>, options: StoreOptions) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("models"))?;
        fs::create_dir_all(root.join("schemas"))?;
        sweep_temporaries(&root)?;

        let mut models = BTreeMap::new();
        for dir in fs::read_dir(root.join("models"))? {
            let meta = dir?.path().join("meta.json");
            // A model directory without metadata is an interrupted upload.
            if meta.is_file() {
                let entry: ModelEntry = read_json(&meta)?;
                models.insert(entry.model_id.clone(), Arc::new(ModelSlot::new(entry)));
            }
        }

        let mut schemas = SchemaRegistry::new();
        for file in fs::read_dir(root.join("schemas"))? {
            let path = file?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let versions: Vec<FieldSchema> = read_json(&path)?;
                for schema in versions {
                    schemas.register(schema).map_err(|e| corrupt(&path, e))?;
                }
            }
        }

        let detectors_file = options
            .detectors_file
            .unwrap_or_else(|| root.join("detectors.json"));
        let mut detectors = DetectorRegistry::with_builtins();
        detectors.set_timeout(options.detector_timeout);
        if detectors_file.is_file() {
            let remote: Vec<DetectorDescriptor> = read_json(&detectors_file)?;
            for d in remote {
                detectors
                    .register(d)
                    .map_err(|e| corrupt(&detectors_file, e))?;
            }
        }

        Ok(Self {
            root,
            detectors_file,
            models: RwLock::new(models),
            uploads: Mutex::new(()),
            schemas: RwLock::new(schemas),
            detectors: RwLock::new(detectors),
            bvh_builds: AtomicUsize::new(0),
            fault: RwLock::new(None),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Installs a hook run between temp write and rename (fault injection).
    pub fn set_fault_hook(&self, hook: Option<FaultHook>) {
        *self.fault.write().unwrap() = hook;
    }

    /// Number of BVHs built since the store was opened.
    pub fn bvh_builds(&self) -> usize {
        self.bvh_builds.load(Ordering::SeqCst)
    }

    fn model_dir(&self, id: &str) -> PathBuf {
        self.root.join("models").join(id)
    }

    fn annotation_path(&self, model_id: &str, id: &Uuid) -> PathBuf {
        self.model_dir(model_id)
            .join("annotations")
            .join(format!("{id}.{ANNOTATION_EXT}"))
    }

    /// Writes `bytes` to `path` via a temporary sibling and a rename.
    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = path.parent().expect("store paths have parents");
        fs::create_dir_all(dir)?;
        let name = path.file_name().unwrap().to_string_lossy();
        let temp = dir.join(format!(".{name}.{}{TEMP_SUFFIX}", Uuid::new_v4().simple()));
        {
            let mut file = fs::File::create(&temp)?;
            file.write_all(bytes)?;
            file.sync_all()?;
        }
        if let Some(hook) = self.fault.read().unwrap().clone() {
            hook(path)?;
        }
        fs::rename(&temp, path)?;
        Ok(())
    }

    // ------------------------------------------------------------ models

    fn slot(&self, id: &str) -> Result<Arc<ModelSlot>> {
        self.models
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownModel(id.to_string()))
    }

    /// Stores a mesh. Identical bytes map to the same entry.
    pub fn upload_model(&self, bytes: &[u8], format: Option<MeshFormat>, name: &str) -> Result<ModelEntry> {
        let id = sha256_hex(bytes);
        if let Ok(slot) = self.slot(&id) {
            return Ok(slot.entry.clone());
        }
        let format = format
            .or_else(|| MeshFormat::from_extension(name))
            .unwrap_or_else(|| MeshFormat::sniff(bytes));
        let mesh = load_mesh(bytes, format, name).map_err(ServiceError::Parse)?;

        let _guard = self.uploads.lock().unwrap();
        if let Ok(slot) = self.slot(&id) {
            return Ok(slot.entry.clone());
        }
        let b = mesh.bounding_box();
        let entry = ModelEntry {
            model_id: id.clone(),
            name: name.to_string(),
            format,
            face_count: mesh.face_count(),
            vertex_count: mesh.vertex_count(),
            bounding_box: Bounds {
                min: b.min.coords.into(),
                max: b.max.coords.into(),
            },
            texture_ref: mesh.texture_ref().map(str::to_string),
            uploaded_at: now(),
        };
        let dir = self.model_dir(&id);
        self.write_atomic(&dir.join(format!("mesh.{}", format.extension())), bytes)?;
        let meta = serde_json::to_vec_pretty(&entry).expect("entry serializes");
        self.write_atomic(&dir.join("meta.json"), &meta)?;

        let slot = ModelSlot::new(entry.clone());
        let _ = slot.mesh.set(Arc::new(mesh));
        self.models.write().unwrap().insert(id, Arc::new(slot));
        Ok(entry)
    }

    pub fn list_models(&self) -> Vec<ModelEntry> {
        self.models
            .read()
            .unwrap()
            .values()
            .map(|s| s.entry.clone())
            .collect()
    }

    pub fn model(&self, id: &str) -> Result<ModelEntry> {
        Ok(self.slot(id)?.entry.clone())
    }

    /// Original upload bytes.
    pub fn mesh_bytes(&self, id: &str) -> Result<Vec<u8>> {
        let slot = self.slot(id)?;
        let path = self
            .model_dir(id)
            .join(format!("mesh.{}", slot.entry.format.extension()));
        Ok(fs::read(path)?)
    }

    pub fn mesh(&self, id: &str) -> Result<Arc<TriangleMesh>> {
        let slot = self.slot(id)?;
        self.slot_mesh(&slot)
    }

    fn slot_mesh(&self, slot: &ModelSlot) -> Result<Arc<TriangleMesh>> {
        if let Some(mesh) = slot.mesh.get() {
            return Ok(mesh.clone());
        }
        let id = &slot.entry.model_id;
        let bytes = self.mesh_bytes(id)?;
        let mesh = load_mesh(&bytes, slot.entry.format, slot.entry.name.clone())
            .map_err(|e| corrupt(&self.model_dir(id), e))?;
        Ok(slot.mesh.get_or_init(|| Arc::new(mesh)).clone())
    }

    /// The model's BVH, built once however many callers ask concurrently.
    pub fn bvh(&self, id: &str) -> Result<(Arc<TriangleMesh>, Arc<Bvh>)> {
        let slot = self.slot(id)?;
        let mesh = self.slot_mesh(&slot)?;
        let bvh = slot
            .bvh
            .get_or_init(|| {
                self.bvh_builds.fetch_add(1, Ordering::SeqCst);
                Arc::new(Bvh::build(&mesh))
            })
            .clone();
        Ok((mesh, bvh))
    }

    // ------------------------------------------------------------ selection

    pub fn select(&self, id: &str, gesture: &Gesture) -> Result<SelectionSet> {
        let (mesh, bvh) = self.bvh(id)?;
        let target = meshnote_core::selection::SelectionTarget::new(id, &mesh, &bvh);
        Ok(target.select(gesture)?)
    }

    // ------------------------------------------------------------ schemas

    pub fn schemas(&self) -> Vec<FieldSchema> {
        self.schemas.read().unwrap().iter().cloned().collect()
    }

    pub fn schema_registry(&self) -> SchemaRegistry {
        self.schemas.read().unwrap().clone()
    }

    /// Registers a schema version. Re-registering an identical version is a
    /// no-op; changing an existing version is a conflict.
    pub fn register_schema(&self, schema: FieldSchema) -> Result<()> {
        schema.check()?;
        let mut registry = self.schemas.write().unwrap();
        if let Some(existing) = registry.get(&schema.reference()) {
            if *existing == schema {
                return Ok(());
            }
            return Err(ServiceError::Conflict(format!(
                "schema `{}` v{} already exists with different entries",
                schema.name, schema.version
            )));
        }
        let mut versions: Vec<FieldSchema> = registry
            .iter()
            .filter(|s| s.name == schema.name)
            .cloned()
            .collect();
        versions.push(schema.clone());
        versions.sort_by_key(|s| s.version);
        let file = self
            .root
            .join("schemas")
            .join(format!("{}.json", heatmap_file_stem(&schema.name)));
        self.write_atomic(&file, &serde_json::to_vec_pretty(&versions).unwrap())?;
        registry.register(schema)?;
        Ok(())
    }

    fn resolve_schema(&self, label: Option<&str>) -> Result<FieldSchema> {
        let (name, version) = parse_schema_ref(label);
        let registry = self.schemas.read().unwrap();
        let found = match version {
            Some(version) => registry.resolve(&SchemaRef { name, version }).cloned()?,
            None => registry.latest(&name).cloned().ok_or_else(|| {
                AnnotationError::SchemaViolation(vec![meshnote_core::annotation::FieldViolation::new(
                    "schema",
                    format!("unknown schema `{name}`"),
                )])
            })?,
        };
        Ok(found)
    }

    // ------------------------------------------------------------ annotations

    fn write_record(&self, record: &AnnotationRecord) -> Result<()> {
        let text = to_canonical_string(&to_wadm(record));
        self.write_atomic(&self.annotation_path(record.mesh_id(), &record.id), text.as_bytes())
    }

    fn read_record(&self, path: &Path, registry: &SchemaRegistry) -> Result<AnnotationRecord> {
        let doc: Value = read_json(path)?;
        from_wadm(&doc, registry).map_err(|e| corrupt(path, e))
    }

    pub fn create_annotation(&self, model_id: &str, input: AnnotationInput) -> Result<AnnotationRecord> {
        let slot = self.slot(model_id)?;
        let mesh = self.slot_mesh(&slot)?;
        let schema = self.resolve_schema(input.schema.as_deref())?;
        let new = NewAnnotation {
            roi: SelectionSet::new(model_id, input.faces),
            title: input.title,
            color: input.color.to_rgb()?,
            description: input.description,
            fields: input.fields,
            creator: input.creator,
        };
        let record = create_annotation(model_id, &mesh, new, &schema)?;
        let _guard = slot.write.lock().unwrap();
        self.write_record(&record)?;
        Ok(record)
    }

    pub fn annotation(&self, model_id: &str, id: &str) -> Result<AnnotationRecord> {
        self.slot(model_id)?;
        let unknown = || ServiceError::UnknownAnnotation(id.to_string());
        let uuid = Uuid::parse_str(id).map_err(|_| unknown())?;
        let path = self.annotation_path(model_id, &uuid);
        if !path.is_file() {
            return Err(unknown());
        }
        self.read_record(&path, &self.schema_registry())
    }

    /// All annotations of a model ordered by creation time, then id.
    pub fn list_annotations(&self, model_id: &str) -> Result<Vec<AnnotationRecord>> {
        self.slot(model_id)?;
        let dir = self.model_dir(model_id).join("annotations");
        let mut records = Vec::new();
        if dir.is_dir() {
            let registry = self.schema_registry();
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if !is_temp(&path) && path.extension().is_some_and(|e| e == ANNOTATION_EXT) {
                    records.push(self.read_record(&path, &registry)?);
                }
            }
        }
        records.sort_by_key(|r| (r.created_at, r.id));
        Ok(records)
    }

    pub fn update_annotation(&self, model_id: &str, id: &str, patch: AnnotationPatch) -> Result<AnnotationRecord> {
        let slot = self.slot(model_id)?;
        let mesh = self.slot_mesh(&slot)?;
        let _guard = slot.write.lock().unwrap();
        let current = self.annotation(model_id, id)?;
        let schema = match patch.schema.as_deref() {
            Some(label) => self.resolve_schema(Some(label))?,
            None => self.schema_registry().resolve(&current.schema)?.clone(),
        };
        let edit = AnnotationEdit {
            roi: patch.faces.map(|f| SelectionSet::new(model_id, f)),
            title: patch.title,
            color: patch.color.map(|c| c.to_rgb()).transpose()?,
            description: patch.description,
            fields: patch.fields,
        };
        let next = current.edited(&mesh, edit, &schema)?;
        self.write_record(&next)?;
        Ok(next)
    }

    /// Deletes an annotation; returns whether it existed.
    pub fn delete_annotation(&self, model_id: &str, id: &str) -> Result<bool> {
        let slot = self.slot(model_id)?;
        let Ok(uuid) = Uuid::parse_str(id) else {
            return Ok(false);
        };
        let _guard = slot.write.lock().unwrap();
        match fs::remove_file(self.annotation_path(model_id, &uuid)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    /// Canonical WADM documents of all annotations, in list order.
    pub fn export_documents(&self, model_id: &str) -> Result<Vec<Value>> {
        Ok(self
            .list_annotations(model_id)?
            .iter()
            .map(to_wadm)
            .collect())
    }

    /// Canonical export text: a JSON array of WADM documents.
    pub fn export(&self, model_id: &str) -> Result<String> {
        Ok(export_text(&self.export_documents(model_id)?))
    }

    /// Imports a batch of WADM documents, all or nothing. Ids are kept;
    /// ids already present are rejected unless `overwrite` is set.
    pub fn import(&self, model_id: &str, documents: &[Value], overwrite: bool) -> Result<ImportSummary> {
        let slot = self.slot(model_id)?;
        let mesh = self.slot_mesh(&slot)?;
        let registry = self.schema_registry();

        let mut violations = Vec::new();
        let mut records = Vec::new();
        for (i, doc) in documents.iter().enumerate() {
            match import_one(i, doc, model_id, &mesh, &registry) {
                Ok(r) => records.push(r),
                Err(mut v) => violations.append(&mut v),
            }
        }
        if !violations.is_empty() {
            return Err(ServiceError::Validation(violations));
        }

        let _guard = slot.write.lock().unwrap();
        let mut seen = std::collections::HashSet::new();
        let mut conflicts: Vec<String> = records
            .iter()
            .filter(|r| !seen.insert(r.id))
            .map(|r| r.id.to_string())
            .collect();
        if !overwrite {
            conflicts.extend(
                records
                    .iter()
                    .filter(|r| self.annotation_path(model_id, &r.id).is_file())
                    .map(|r| r.id.to_string()),
            );
        }
        if !conflicts.is_empty() {
            conflicts.sort();
            conflicts.dedup();
            return Err(ServiceError::IdConflict(conflicts));
        }
        for record in &records {
            self.write_record(record)?;
        }
        Ok(ImportSummary {
            imported: records.len(),
            ids: records.iter().map(|r| r.id).collect(),
        })
    }

    /// Checks every stored annotation document; returns offending files.
    pub fn scan(&self) -> Result<Vec<(PathBuf, String)>> {
        let registry = self.schema_registry();
        let mut bad = Vec::new();
        for model in self.list_models() {
            let dir = self.model_dir(&model.model_id).join("annotations");
            if !dir.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if is_temp(&path) {
                    continue;
                }
                let problem = match fs::read(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|b| serde_json::from_slice::<Value>(&b).map_err(|e| e.to_string()))
                {
                    Err(e) => Some(e),
                    Ok(doc) => {
                        let v = validate_wadm(&doc);
                        if !v.is_empty() {
                            Some(format!("{v:?}"))
                        } else {
                            from_wadm(&doc, &registry).err().map(|e| e.to_string())
                        }
                    }
                };
                if let Some(p) = problem {
                    bad.push((path, p));
                }
            }
        }
        Ok(bad)
    }

    // ------------------------------------------------------------ detectors

    pub fn detectors(&self) -> Vec<DetectorDescriptor> {
        self.detectors.read().unwrap().iter().cloned().collect()
    }

    /// Adds a remote detector and persists the registry file.
    pub fn register_detector(&self, descriptor: DetectorDescriptor) -> Result<()> {
        let mut registry = self.detectors.write().unwrap();
        let mut next = registry.clone();
        next.register(descriptor)?;
        let remote: Vec<&DetectorDescriptor> = next.iter().filter(|d| !d.is_builtin()).collect();
        self.write_atomic(&self.detectors_file, &serde_json::to_vec_pretty(&remote).unwrap())?;
        *registry = next;
        Ok(())
    }

    /// Runs a detector, or returns the stored map unless `force` is set.
    pub fn detect(&self, model_id: &str, name: &str, force: bool) -> Result<HeatMap> {
        let slot = self.slot(model_id)?;
        let registry = self.detectors.read().unwrap().clone();
        let descriptor = registry
            .get(name)
            .ok_or_else(|| ServiceError::UnknownDetector(name.to_string()))?;
        let path = self
            .model_dir(model_id)
            .join("heatmaps")
            .join(format!("{}.json", heatmap_file_stem(&descriptor.name)));
        if !force && path.is_file() {
            return read_json(&path);
        }
        let mesh = self.slot_mesh(&slot)?;
        let map = registry.run(&descriptor.name, model_id, &mesh)?;
        let _guard = slot.write.lock().unwrap();
        self.write_atomic(&path, &serde_json::to_vec(&map).unwrap())?;
        Ok(map)
    }

    /// Faces of a stored heat map at `threshold`.
    pub fn threshold(&self, model_id: &str, name: &str, threshold: f64) -> Result<SelectionSet> {
        let map = self.detect(model_id, name, false)?;
        let mesh = self.mesh(model_id)?;
        Ok(heatmap_to_selection(model_id, &mesh, &map, threshold)?)
    }
}

impl ModelSlot {
    fn new(entry: ModelEntry) -> Self {
        Self {
            entry,
            mesh: OnceLock::new(),
            bvh: OnceLock::new(),
            write: Mutex::new(()),
        }
    }
}

/// Text of an export: a pretty-printed JSON array plus a final newline.
pub fn export_text(documents: &[Value]) -> String {
    let mut text = serde_json::to_string_pretty(documents).expect("JSON values serialize");
    text.push('\n');
    text
}

fn import_one(
    index: usize,
    doc: &Value,
    model_id: &str,
    mesh: &TriangleMesh,
    registry: &SchemaRegistry,
) -> std::result::Result<AnnotationRecord, Vec<DocumentViolation>> {
    let id = doc.get("id").and_then(Value::as_str).map(str::to_string);
    let violation = |path: &str, rule: String| DocumentViolation {
        document: index,
        id: id.clone(),
        path: path.to_string(),
        rule,
    };
    let record = from_wadm(doc, registry).map_err(|e| match e {
        AnnotationError::Validation(v) => v
            .into_iter()
            .map(|v| violation(&v.path, v.rule))
            .collect(),
        AnnotationError::SelectorUnsupported(t) => vec![violation(
            "$.target.selector.type",
            format!("unsupported selector type `{t}`"),
        )],
        AnnotationError::SchemaViolation(v) => v
            .into_iter()
            .map(|f| violation(&format!("$.body.value.fields.{}", f.key), f.reason))
            .collect(),
        other => vec![violation("$.body.value", other.to_string())],
    })?;
    if record.mesh_id() != model_id {
        return Err(vec![violation(
            "$.target.source",
            format!("references model `{}`, not `{model_id}`", record.mesh_id()),
        )]);
    }
    match record.check_against(mesh) {
        Ok(()) => Ok(record),
        Err(AnnotationError::Selection(SelectionError::FaceOutOfRange { face, face_count })) => {
            let position = record.roi.faces.iter().position(|&f| f == face).unwrap_or(0);
            let path = doc
                .pointer("/target/selector/faces")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().position(|v| v.as_u64() == Some(face as u64)))
                .unwrap_or(position);
            Err(vec![violation(
                &format!("$.target.selector.faces[{path}]"),
                format!("face {face} is out of range for a mesh with {face_count} faces"),
            )])
        }
        Err(e) => Err(vec![violation("$.target.selector.vertices", e.to_string())]),
    }
}

/// A heat map with summary statistics, as returned by the detect endpoint.
pub fn heatmap_document(map: &HeatMap) -> Value {
    let n = map.values.len().max(1) as f64;
    let (min, max, sum) = map.values.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, 0.0),
        |(lo, hi, s), &v| (lo.min(v), hi.max(v), s + v),
    );
    let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
    serde_json::json!({
        "model_id": map.mesh_id,
        "detector": map.detector,
        "normalized": map.normalized,
        "stats": { "min": finite(min), "max": finite(max), "mean": sum / n },
        "values": map.values,
    })
}

/// Selected faces as returned by the select endpoint and `meshnote select`.
pub fn selection_document(selection: &SelectionSet, mode: &str) -> Value {
    serde_json::json!({
        "model_id": selection.mesh_id,
        "mode": mode,
        "faces": selection.to_vec(),
    })
}

/// Content id of mesh bytes, as assigned on upload.
pub fn model_id_for(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}

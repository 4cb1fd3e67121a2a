use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use diagraph_core::detectsim::{perturb, NoiseConfig};
use diagraph_core::formats::{read_detections, CodecRegistry, DetectionFile};
use diagraph_core::model::AnnotationSet;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::archive::tar_archive;
use crate::store::{AnnotationRevision, DiagramInfo, NewRevision, Store, StoreError, AUTO_AUTHOR};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub codecs: Arc<CodecRegistry>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState {
            store: Arc::new(store),
            codecs: Arc::new(CodecRegistry::default()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/diagrams", get(list_diagrams))
        .route("/diagrams/{id}", get(get_diagram))
        .route("/diagrams/{id}/svg", get(get_svg))
        .route("/diagrams/{id}/annotations", get(get_annotations).put(put_annotations))
        .route("/diagrams/{id}/revisions", get(get_revisions))
        .route("/diagrams/{id}/auto-annotate", post(auto_annotate))
        .route("/export", post(export))
        .with_state(state)
}

/// Error responses: `{"error": kind, "message": ..., ...}`.
#[derive(Debug)]
pub enum ApiError {
    Store(StoreError),
    BadRequest(String),
    Unprocessable(String),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Store(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, extra) = match &self {
            ApiError::Store(e) => match e {
                StoreError::NotFound(_) | StoreError::NoRevision { .. } => {
                    (StatusCode::NOT_FOUND, "not-found", json!({}))
                }
                StoreError::Conflict { current, .. } => {
                    (StatusCode::CONFLICT, "conflict", json!({ "current_version": current }))
                }
                StoreError::Invalid { violations } => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid",
                    json!({ "violations": violations }),
                ),
                StoreError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request", json!({})),
                StoreError::Exists(_) => (StatusCode::CONFLICT, "exists", json!({})),
                StoreError::Io { .. } | StoreError::Corrupt { .. } => {
                    log::error!("{e}");
                    (StatusCode::INTERNAL_SERVER_ERROR, "internal", json!({}))
                }
            },
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request", json!({})),
            ApiError::Unprocessable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable", json!({})),
        };
        let message = match &self {
            ApiError::Store(e) => e.to_string(),
            ApiError::BadRequest(m) | ApiError::Unprocessable(m) => m.clone(),
        };
        let mut body = json!({ "error": kind, "message": message });
        if let (Some(b), Some(x)) = (body.as_object_mut(), extra.as_object()) {
            b.extend(x.clone());
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "default_limit")]
    pub limit: usize,
}

fn default_limit() -> usize {
    100
}

async fn list_diagrams(State(s): State<AppState>, Query(q): Query<PageQuery>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.store.list(q.offset, q.limit.min(1000))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramView {
    pub diagram: DiagramInfo,
    pub svg: String,
    pub revision: Option<AnnotationRevision>,
}

async fn get_diagram(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DiagramView>> {
    Ok(Json(DiagramView {
        diagram: s.store.info(&id)?,
        svg: s.store.svg(&id)?,
        revision: s.store.latest(&id)?,
    }))
}

async fn get_svg(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], s.store.svg(&id)?))
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    pub version: Option<u64>,
}

async fn get_annotations(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> ApiResult<Json<AnnotationRevision>> {
    let version = match q.version {
        Some(v) => v,
        None => s.store.latest_version(&id)?,
    };
    Ok(Json(s.store.revision(&id, version)?))
}

async fn get_revisions(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<AnnotationRevision>>> {
    Ok(Json(s.store.history(&id)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PutAnnotations {
    pub set: AnnotationSet,
    pub expected_version: u64,
    #[serde(default)]
    pub author: Option<String>,
    /// Store the set even if it fails validation, recording the violations.
    #[serde(default)]
    pub acknowledge_violations: bool,
}

async fn put_annotations(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<PutAnnotations>,
) -> ApiResult<Json<AnnotationRevision>> {
    let author = body.author.unwrap_or_else(|| "reviewer".to_string());
    if author == AUTO_AUTHOR {
        return Err(ApiError::BadRequest(format!("author {AUTO_AUTHOR:?} is reserved")));
    }
    let rev = NewRevision {
        set: body.set,
        author,
        acknowledge_violations: body.acknowledge_violations,
    };
    Ok(Json(s.store.append(&id, Some(body.expected_version), rev)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum AutoSource {
    /// External detector output; text blocks come from the diagram's reference.
    Detections { file: DetectionFile },
    /// Simulated detector applied to the diagram's reference annotations.
    Simulate {
        #[serde(default)]
        noise: NoiseConfig,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoAnnotate {
    pub source: AutoSource,
    #[serde(default)]
    pub expected_version: Option<u64>,
}

/// Auto-annotations are stored even when imperfect; their violations are
/// recorded as acknowledged.
async fn auto_annotate(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<AutoAnnotate>,
) -> ApiResult<Json<AnnotationRevision>> {
    let info = s.store.info(&id)?;
    let reference = s.store.reference(&id)?;
    let set = match body.source {
        AutoSource::Detections { file } => {
            if file.diagram_id != id {
                return Err(ApiError::BadRequest(format!(
                    "detections are for {}, not {id}",
                    file.diagram_id
                )));
            }
            let mut set = AnnotationSet::new(id.clone(), info.kind, info.width, info.height);
            set.objects =
                read_detections(&file, info.width, info.height).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
            set.texts = reference.map(|r| r.texts).unwrap_or_default();
            set
        }
        AutoSource::Simulate { noise, seed } => {
            let reference =
                reference.ok_or_else(|| ApiError::Unprocessable(format!("{id} has no reference annotations")))?;
            perturb(&reference, &noise, seed).map_err(|e| ApiError::Unprocessable(e.to_string()))?
        }
    };
    let rev = NewRevision {
        set,
        author: AUTO_AUTHOR.to_string(),
        acknowledge_violations: true,
    };
    Ok(Json(s.store.append(&id, body.expected_version, rev)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportRequest {
    pub ids: Vec<String>,
    pub format: String,
    /// Pinned versions; unlisted ids export their latest revision.
    #[serde(default)]
    pub versions: BTreeMap<String, u64>,
}

async fn export(State(s): State<AppState>, Json(req): Json<ExportRequest>) -> ApiResult<Response> {
    let codec = s.codecs.get(&req.format).ok_or_else(|| {
        ApiError::BadRequest(format!(
            "unknown format {:?}; available: {}",
            req.format,
            s.codecs.names().join(", ")
        ))
    })?;
    if req.ids.is_empty() {
        return Err(ApiError::BadRequest("ids must not be empty".into()));
    }
    let mut ids = req.ids.clone();
    ids.sort();
    ids.dedup();
    let mut sets = Vec::with_capacity(ids.len());
    for id in &ids {
        let version = match req.versions.get(id) {
            Some(&v) => v,
            None => match s.store.latest_version(id)? {
                0 => return Err(ApiError::Unprocessable(format!("{id} has no annotations to export"))),
                v => v,
            },
        };
        sets.push(s.store.revision(id, version)?.set);
    }
    let bytes = tar_archive(&codec.export(&sets)).map_err(|e| {
        ApiError::Store(StoreError::Io {
            path: "<export>".into(),
            source: e,
        })
    })?;
    let disposition = format!("attachment; filename=\"export-{}.tar\"", req.format);
    Ok((
        [
            (header::CONTENT_TYPE, "application/x-tar".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

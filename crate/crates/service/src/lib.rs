//! HTTP/JSON front end for the maskfx pipeline.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | `POST` | `/api/sessions` | image bytes (PPM or PNG) | `201` [`SessionCreated`] |
//! | `PUT` | `/api/sessions/{id}/manifest` | manifest JSON | [`ManifestReplaced`] |
//! | `GET` | `/api/sessions/{id}/classes` | `?score_threshold=` | [`ClassList`] |
//! | `GET` | `/api/filters` | | [`FilterList`] |
//! | `POST` | `/api/sessions/{id}/render` | [`RenderRequest`] | PNG |
//! | `DELETE` | `/api/sessions/{id}` | | `204` |
//!
//! A new session gets its manifest from the configured external segmenter,
//! or starts with no instances when none is configured; either way it can be
//! replaced through the manifest endpoint. Errors are JSON [`ErrorBody`]
//! values with a 4xx/5xx status.
//!
//! [`ErrorBody`]: maskfx_core::api::ErrorBody

mod error;
mod sessions;

use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use maskfx_core::api::{
    ClassList, FilterList, ManifestReplaced, RenderRequest, SessionCreated, CLASS_HEADER,
    CLASS_ID_HEADER, MASK_AREA_HEADER, NOTICE_HEADER,
};
use maskfx_core::selection::{compose_class_masks, rank_class_masks, DEFAULT_SCORE_THRESHOLD};
use maskfx_core::{
    decode_image, encode_png, encode_ppm, parse_manifest, run_external_segmenter, RasterImage,
    Renderer, SegmentationManifest,
};
use serde::Deserialize;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use uuid::Uuid;

pub use error::ApiError;
pub use sessions::{Session, SessionTable};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_MAX_UPLOAD: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub renderer: Renderer,
    /// Command template run on every upload.
    pub segmenter: Option<String>,
    pub session_ttl: Duration,
    pub max_upload_bytes: usize,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            renderer: Renderer::builtin(),
            segmenter: None,
            session_ttl: DEFAULT_SESSION_TTL,
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub renderer: Arc<Renderer>,
    pub segmenter: Option<Arc<str>>,
    pub sessions: SessionTable,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Self {
        Self {
            renderer: Arc::new(config.renderer.clone()),
            segmenter: config.segmenter.as_deref().map(Arc::from),
            sessions: SessionTable::new(),
        }
    }
}

/// Routes over an existing state; static assets are mounted when configured.
pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", axum::routing::delete(delete_session))
        .route("/api/sessions/{id}/manifest", put(replace_manifest))
        .route("/api/sessions/{id}/classes", get(list_classes))
        .route("/api/sessions/{id}/render", post(render))
        .route("/api/filters", get(list_filters))
        .layer(DefaultBodyLimit::max(config.max_upload_bytes))
        .with_state(state);
    match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async {
            ApiError::new(StatusCode::NOT_FOUND, "no such endpoint")
        }),
    }
}

/// Serves until `shutdown` resolves, sweeping idle sessions in the
/// background.
pub async fn serve(
    listener: TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let state = AppState::new(&config);
    let app = router(state.clone(), &config);
    let ttl = config.session_ttl;
    let sweeper = tokio::spawn(async move {
        let period = (ttl / 4).clamp(Duration::from_millis(100), Duration::from_secs(60));
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = state.sessions.sweep(Instant::now(), ttl);
            if n > 0 {
                tracing::info!(expired = n, live = state.sessions.len(), "swept idle sessions");
            }
        }
    });
    tracing::info!(addr = %listener.local_addr()?, "maskfx service listening");
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}

fn session_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError::not_found(raw))
}

fn session(state: &AppState, raw: &str) -> Result<(Uuid, Session), ApiError> {
    let id = session_id(raw)?;
    let s = state.sessions.get(&id).ok_or_else(|| ApiError::not_found(raw))?;
    Ok((id, s))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

fn check_dimensions(image: &RasterImage, manifest: &SegmentationManifest) -> Result<(), String> {
    if image.dimensions() == manifest.dimensions() {
        return Ok(());
    }
    let ((iw, ih), (mw, mh)) = (image.dimensions(), manifest.dimensions());
    Err(format!("manifest is {mw}x{mh} but the image is {iw}x{ih}"))
}

fn segment(image: &RasterImage, template: &str, renderer: &Renderer) -> Result<SegmentationManifest, ApiError> {
    let dir = tempfile::tempdir().map_err(ApiError::internal)?;
    let path = dir.path().join("upload.ppm");
    std::fs::write(&path, encode_ppm(image)).map_err(ApiError::internal)?;
    let manifest = run_external_segmenter(&path, template, &renderer.classes)?;
    check_dimensions(image, &manifest)
        .map_err(|m| ApiError::new(StatusCode::BAD_GATEWAY, format!("segmenter output: {m}")))?;
    Ok(manifest)
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let bytes = body?;
    if bytes.is_empty() {
        return Err(ApiError::bad_request("empty upload"));
    }
    let st = state.clone();
    let (image, manifest) = blocking(move || {
        let image = decode_image(&bytes, Path::new("upload"))?;
        let manifest = match &st.segmenter {
            Some(template) => segment(&image, template, &st.renderer)?,
            None => SegmentationManifest::empty(image.width(), image.height()),
        };
        Ok((image, manifest))
    })
    .await?;
    let created = SessionCreated {
        session_id: String::new(),
        width: image.width(),
        height: image.height(),
        instances: manifest.instances().len(),
    };
    let id = state.sessions.insert(image, manifest);
    tracing::info!(session = %id, width = created.width, height = created.height, "session created");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: id.to_string(),
            ..created
        }),
    ))
}

async fn replace_manifest(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<ManifestReplaced>, ApiError> {
    let bytes = body?;
    let (id, session) = session(&state, &raw)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| ApiError::bad_request("manifest is not UTF-8"))?;
    let manifest = parse_manifest(text, None, &state.renderer.classes)?;
    check_dimensions(&session.image, &manifest).map_err(ApiError::bad_request)?;
    let instances = manifest.instances().len();
    if !state.sessions.replace_manifest(&id, manifest) {
        return Err(ApiError::not_found(&raw));
    }
    Ok(Json(ManifestReplaced { instances }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassQuery {
    score_threshold: Option<f64>,
}

async fn list_classes(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
    query: Result<Query<ClassQuery>, QueryRejection>,
) -> Result<Json<ClassList>, ApiError> {
    let Query(query) = query?;
    let threshold = query.score_threshold.unwrap_or(DEFAULT_SCORE_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ApiError::bad_request(format!("score threshold {threshold} outside [0, 1]")));
    }
    let (_, session) = session(&state, &raw)?;
    let ranked = rank_class_masks(
        compose_class_masks(&session.manifest, threshold),
        &state.renderer.priority,
    );
    Ok(Json(ClassList {
        classes: ranked.iter().map(|c| c.summary()).collect(),
    }))
}

async fn list_filters(State(state): State<AppState>) -> Json<FilterList> {
    Json(FilterList {
        filters: state.renderer.registry.schemas(),
    })
}

async fn render(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let bytes = body?;
    let request: RenderRequest = serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::bad_request(format!("invalid render request: {e}")))?;
    let config = request
        .to_config()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (id, session) = session(&state, &raw)?;
    let renderer = state.renderer.clone();
    let (out, png) = blocking(move || {
        let out = renderer.render(&session.image, &session.manifest, &config)?;
        let png = encode_png(&out.image).map_err(ApiError::internal)?;
        Ok((out, png))
    })
    .await?;
    tracing::info!(session = %id, area = out.mask_area, "rendered");

    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    let mut set = |name: &'static str, value: String| {
        if let Ok(v) = HeaderValue::from_str(&value) {
            headers.insert(HeaderName::from_static(name), v);
        }
    };
    set(MASK_AREA_HEADER, out.mask_area.to_string());
    if let Some(s) = &out.selected {
        set(CLASS_HEADER, s.class_name.clone());
        set(CLASS_ID_HEADER, s.class_id.to_string());
    }
    if let Some(n) = out.notice {
        set(NOTICE_HEADER, n);
    }
    Ok((headers, png).into_response())
}

async fn delete_session(
    State(state): State<AppState>,
    UrlPath(raw): UrlPath<String>,
) -> Result<StatusCode, ApiError> {
    let id = session_id(&raw)?;
    if state.sessions.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&raw))
    }
}

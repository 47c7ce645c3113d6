//! HTTP/JSON interface: catalog images and the session lifecycle.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use iterator_core::catalog::{image_path, load_catalog, DesignId};
use iterator_core::session::{RoundRecord, Session, SessionConfig, SessionStatus, Transcript};
use iterator_core::{DesignSpace, Error, Strategy};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

/// A catalog loaded from disk with its embeddings.
pub struct CatalogHandle {
    pub name: String,
    pub dir: PathBuf,
    pub space: DesignSpace,
}

impl CatalogHandle {
    pub fn load(dir: &Path) -> iterator_core::Result<Self> {
        let catalog = load_catalog(dir)?;
        let name = dir
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "default".into());
        Ok(Self {
            name,
            dir: dir.to_path_buf(),
            space: DesignSpace::build(catalog)?,
        })
    }
}

struct SessionSlot {
    catalog: Arc<CatalogHandle>,
    session: Mutex<Session>,
}

pub struct AppState {
    catalogs: BTreeMap<String, Arc<CatalogHandle>>,
    default_catalog: String,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    transcript_dir: Option<PathBuf>,
}

impl AppState {
    /// The first catalog is the default for requests that name none.
    pub fn new(catalogs: Vec<CatalogHandle>, transcript_dir: Option<PathBuf>) -> Self {
        let default_catalog = catalogs.first().map(|c| c.name.clone()).unwrap_or_default();
        Self {
            catalogs: catalogs.into_iter().map(|c| (c.name.clone(), Arc::new(c))).collect(),
            default_catalog,
            sessions: RwLock::new(HashMap::new()),
            transcript_dir,
        }
    }

    fn catalog(&self, name: Option<&str>) -> Result<Arc<CatalogHandle>, ApiError> {
        let name = name.unwrap_or(&self.default_catalog);
        self.catalogs
            .get(name)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown catalog '{name}'")))
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session '{id}'")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub catalog: Option<String>,
    pub strategy: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub selected: Vec<u32>,
    /// Round the client is answering; a mismatch is rejected as stale.
    #[serde(default)]
    pub round: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiProposal {
    pub id: u32,
    pub image_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRoundMetrics {
    pub round: u32,
    pub num_selected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_loss: Option<f64>,
    pub model_version: u32,
}

impl From<&RoundRecord> for ApiRoundMetrics {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round,
            num_selected: r.num_selected,
            batch_auc: r.batch_auc,
            log_loss: r.log_loss,
            model_version: r.model_version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub session_id: String,
    pub catalog: String,
    pub strategy: String,
    pub seed: u64,
    pub round: u32,
    pub status: SessionStatus,
    pub proposals: Vec<ApiProposal>,
    pub metrics: Vec<ApiRoundMetrics>,
}

fn api_session(catalog: &CatalogHandle, s: &Session) -> ApiSession {
    ApiSession {
        session_id: s.id().to_string(),
        catalog: catalog.name.clone(),
        strategy: s.strategy().name().to_string(),
        seed: s.config().seed,
        round: s.round(),
        status: s.status(),
        proposals: s
            .current_proposals()
            .iter()
            .map(|id| ApiProposal {
                id: id.0,
                image_url: format!("/designs/{}/image?catalog={}", id.0, catalog.name),
            })
            .collect(),
        metrics: s.history().iter().map(ApiRoundMetrics::from).collect(),
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    current_round: Option<u32>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            current_round: None,
        }
    }

    fn conflict(message: impl Into<String>, round: u32) -> Self {
        Self {
            current_round: Some(round),
            ..Self::new(StatusCode::CONFLICT, message)
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) | Error::UnknownDesign(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::SessionEnded => StatusCode::CONFLICT,
            Error::Config(_) | Error::UnknownStrategy(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    current_round: Option<u32>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.message,
            current_round: self.current_round,
        };
        (self.status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

async fn create_session(State(state): State<Shared>, Json(req): Json<CreateSessionRequest>) -> Result<(StatusCode, Json<ApiSession>), ApiError> {
    let strategy: Strategy = req.strategy.parse()?;
    let catalog = state.catalog(req.catalog.as_deref())?;
    let seed = req.seed.unwrap_or_else(rand::random);
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::create(&catalog.space, SessionConfig::new(strategy, seed), id.clone())?;
    let body = api_session(&catalog, &session);
    log::info!("session {id} created: strategy {strategy}, seed {seed}");
    state.sessions.write().expect("session table poisoned").insert(
        id,
        Arc::new(SessionSlot {
            catalog,
            session: Mutex::new(session),
        }),
    );
    Ok((StatusCode::CREATED, Json(body)))
}

async fn submit_feedback(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<FeedbackRequest>,
) -> Result<Json<ApiSession>, ApiError> {
    let slot = state.slot(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut session = match slot.session.try_lock() {
            Ok(s) => s,
            Err(TryLockError::WouldBlock) => {
                return Err(ApiError::new(StatusCode::CONFLICT, "feedback for this session is already being applied"))
            }
            Err(TryLockError::Poisoned(_)) => return Err(ApiError::internal("session state poisoned")),
        };
        if session.status() == SessionStatus::Ended {
            return Err(ApiError::conflict("session has ended", session.round()));
        }
        if let Some(round) = req.round {
            if round != session.round() {
                return Err(ApiError::conflict(
                    format!("feedback is for round {round} but the session is at round {}", session.round()),
                    session.round(),
                ));
            }
        }
        let selected: Vec<DesignId> = req.selected.iter().map(|&i| DesignId(i)).collect();
        session.submit_feedback(&slot.catalog.space, &selected)?;
        Ok(Json(api_session(&slot.catalog, &session)))
    })
    .await
    .map_err(ApiError::internal)?
}

async fn end_session(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Transcript>, ApiError> {
    let slot = state.slot(&id)?;
    let dir = state.transcript_dir.clone();
    tokio::task::spawn_blocking(move || {
        let mut session = slot.session.lock().map_err(|_| ApiError::internal("session state poisoned"))?;
        let first_end = session.status() == SessionStatus::Active;
        let transcript = session.end();
        if let (true, Some(dir)) = (first_end, dir) {
            let path = dir.join(format!("{id}.json"));
            let json = transcript.to_json()?;
            std::fs::write(&path, json).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))?;
        }
        Ok(Json(transcript))
    })
    .await
    .map_err(ApiError::internal)?
}

async fn get_session(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<ApiSession>, ApiError> {
    let slot = state.slot(&id)?;
    tokio::task::spawn_blocking(move || {
        let session = slot.session.lock().map_err(|_| ApiError::internal("session state poisoned"))?;
        Ok(Json(api_session(&slot.catalog, &session)))
    })
    .await
    .map_err(ApiError::internal)?
}

async fn get_metrics(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<Vec<ApiRoundMetrics>>, ApiError> {
    let slot = state.slot(&id)?;
    tokio::task::spawn_blocking(move || {
        let session = slot.session.lock().map_err(|_| ApiError::internal("session state poisoned"))?;
        Ok(Json(session.history().iter().map(ApiRoundMetrics::from).collect()))
    })
    .await
    .map_err(ApiError::internal)?
}

#[derive(Debug, Deserialize)]
struct ImageQuery {
    catalog: Option<String>,
}

async fn design_image(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<u32>,
    Query(q): Query<ImageQuery>,
) -> Result<Response, ApiError> {
    let catalog = state.catalog(q.catalog.as_deref())?;
    let id = DesignId(id);
    if !catalog.space.catalog().contains(id) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown design {id}")));
    }
    let path = image_path(&catalog.dir, id);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(end_session))
        .route("/sessions/{id}/feedback", post(submit_feedback))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/designs/{id}/image", get(design_image))
        .layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

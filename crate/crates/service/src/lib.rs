//! Local HTTP service for the sign authoring UI.
//!
//! Every response body is an envelope:
//!
//! ```json
//! {"request_id": "r-000001", "payload": {...}}
//! {"request_id": "r-000002", "error": {"code": "unknown_gloss", "message": "..."}}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use signforge::animation::Animation;
use signforge::fsutil::write_atomic;
use signforge::kinematics::{forward, solve_ik, IkGoal, IkOptions, MirrorMap, Pose};
use signforge::lexicon::{
    compile_sign, is_gloss, parse_sign, sign_files, sign_path, validate_sign, CompileOptions, LexiconError,
    SIGN_SUFFIX,
};
use signforge::qanim::emit_qanim;
use signforge::sentence::{compose, ComposeOptions, GlossSentence, SentenceDocument, SentenceError};
use signforge::KinematicChain;

pub const DEFAULT_PORT: u16 = 7465;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub chain: KinematicChain,
    pub mirror_map: MirrorMap,
    pub compile: CompileOptions,
    pub compose: ComposeOptions,
    pub lexicon_dir: PathBuf,
    /// Built UI bundle served at `/` when the directory exists.
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn pepper(lexicon_dir: impl Into<PathBuf>) -> Self {
        Self {
            chain: KinematicChain::pepper_right_arm(),
            mirror_map: MirrorMap::pepper_default(),
            compile: CompileOptions::default(),
            compose: ComposeOptions::default(),
            lexicon_dir: lexicon_dir.into(),
            ui_dir: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// Response body: exactly one of `payload` and `error` is present.
#[derive(Debug, Serialize)]
pub struct ApiEnvelope {
    pub request_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiErrorBody>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ApiErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ApiErrorBody { code: code.into(), message: message.into(), details: None } }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "schema_violation", message)
    }

    fn unknown_gloss(gloss: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_gloss", format!("no sign for gloss `{gloss}`"))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn with_details(mut self, details: Value) -> Self {
        self.body.details = Some(details);
        self
    }
}

impl From<LexiconError> for ApiError {
    fn from(e: LexiconError) -> Self {
        match e {
            LexiconError::SchemaViolation { .. }
            | LexiconError::NonIncreasingTimes { .. }
            | LexiconError::ManualOnly(_)
            | LexiconError::Kinematics(_)
            | LexiconError::Animation(_) => ApiError::bad_request(e.to_string()),
            LexiconError::FailedCompile(report) => {
                let details = serde_json::to_value(&*report).unwrap_or(Value::Null);
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "compile_failed", report.reasons.join("; "))
                    .with_details(details)
            }
            LexiconError::Qanim(_) | LexiconError::Io { .. } => ApiError::internal(e.to_string()),
        }
    }
}

type ApiResult = Result<Value, ApiError>;

struct Inner {
    config: ServiceConfig,
    next_id: AtomicU64,
    gloss_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self(Arc::new(Inner { config, next_id: AtomicU64::new(1), gloss_locks: Mutex::new(HashMap::new()) }))
    }

    fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn respond(&self, result: ApiResult) -> Response {
        let request_id = format!("r-{:06}", self.0.next_id.fetch_add(1, Ordering::Relaxed));
        let (status, envelope) = match result {
            Ok(payload) => (StatusCode::OK, ApiEnvelope { request_id, payload: Some(payload), error: None }),
            Err(e) => (e.status, ApiEnvelope { request_id, payload: None, error: Some(e.body) }),
        };
        (status, Json(envelope)).into_response()
    }

    fn gloss_lock(&self, gloss: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.0.gloss_locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(gloss.to_string()).or_default().clone()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| ApiError::bad_request(format!("{}: {}", e.path(), e.inner())))
}

fn to_value<T: Serialize>(v: &T) -> ApiResult {
    serde_json::to_value(v).map_err(|e| ApiError::internal(e.to_string()))
}

async fn blocking<F>(f: F) -> ApiResult
where
    F: FnOnce() -> ApiResult + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.unwrap_or_else(|e| Err(ApiError::internal(e.to_string())))
}

fn checked_gloss(gloss: &str) -> Result<(), ApiError> {
    if is_gloss(gloss) {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("`{gloss}` is not a valid gloss")))
    }
}

fn wxyz(pose: &Pose) -> [f64; 4] {
    let c = pose.orientation.coords;
    [c.w, c.x, c.y, c.z]
}

async fn get_model(State(state): State<AppState>) -> Response {
    let chain = &state.config().chain;
    let joints: Vec<Value> = chain
        .joints
        .iter()
        .map(|j| {
            let q = j.origin.rotation.coords;
            json!({
                "name": j.name,
                "origin": {"translation": j.origin.translation.vector.as_slice(), "rotation": [q.w, q.x, q.y, q.z]},
                "axis": j.axis.as_slice(),
                "lower": j.lower,
                "upper": j.upper,
            })
        })
        .collect();
    let tq = chain.tip_offset.rotation.coords;
    let payload = json!({
        "base": chain.base,
        "tip": chain.tip,
        "joints": joints,
        "tip_offset": {"translation": chain.tip_offset.translation.vector.as_slice(), "rotation": [tq.w, tq.x, tq.y, tq.z]},
        "mirror_map": state.config().mirror_map,
        "keepout": state.config().compile.keepout,
        "fps": state.config().compile.fps,
    });
    state.respond(Ok(payload))
}

#[derive(Deserialize)]
struct IkRequest {
    #[serde(flatten)]
    goal: IkGoal,
    #[serde(default)]
    options: Option<IkOptions>,
}

async fn post_ik(State(state): State<AppState>, body: Bytes) -> Response {
    let result = match parse_body::<IkRequest>(&body) {
        Ok(req) => {
            let s = state.clone();
            blocking(move || {
                let options = req.options.unwrap_or_else(|| s.config().compile.ik.clone());
                let solution = solve_ik(&s.config().chain, &req.goal, &options)
                    .map_err(|e| ApiError::bad_request(e.to_string()))?;
                to_value(&solution)
            })
            .await
        }
        Err(e) => Err(e),
    };
    state.respond(result)
}

fn compile_document(state: &AppState, text: &str) -> ApiResult {
    let sign = parse_sign(text)?;
    let config = state.config();
    let (animation, report) = compile_sign(&sign, &config.chain, &config.mirror_map, &config.compile)?;
    Ok(json!({"animation": to_value(&animation)?, "report": to_value(&report)?}))
}

async fn post_compile(State(state): State<AppState>, body: Bytes) -> Response {
    let result = match String::from_utf8(body.to_vec()) {
        Ok(text) => {
            let s = state.clone();
            blocking(move || compile_document(&s, &text)).await
        }
        Err(_) => Err(ApiError::bad_request("body is not UTF-8")),
    };
    state.respond(result)
}

#[derive(Deserialize)]
struct SampleRequest {
    animation: Animation,
    /// Output rate; defaults to the animation's own.
    #[serde(default)]
    fps: Option<u32>,
}

fn sample_animation(state: &AppState, req: SampleRequest) -> ApiResult {
    let anim = req.animation;
    anim.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let fps = req.fps.unwrap_or(anim.fps);
    if fps == 0 {
        return Err(ApiError::bad_request("fps must be positive"));
    }
    let chain = &state.config().chain;
    let duration = f64::from(anim.last_frame()) / f64::from(anim.fps);
    let count = (duration * f64::from(fps) + 1e-9).floor() as u64 + 1;
    let mut frames = Vec::with_capacity(count as usize);
    for i in 0..count {
        let time = i as f64 / f64::from(fps);
        let values = anim.sample(time * f64::from(anim.fps)).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let q: Option<Vec<f64>> =
            chain.joints.iter().map(|j| values.get(&j.name).map(|deg| deg.to_radians())).collect();
        let tip = q.and_then(|q| forward(chain, &q).ok()).map(|p| json!({"position": p.position.as_slice(), "orientation": wxyz(&p)}));
        frames.push(json!({"frame": i, "time": time, "values": values, "tip": tip}));
    }
    Ok(json!({"fps": fps, "frames": frames}))
}

async fn post_sample(State(state): State<AppState>, body: Bytes) -> Response {
    let result = match parse_body::<SampleRequest>(&body) {
        Ok(req) => {
            let s = state.clone();
            blocking(move || sample_animation(&s, req)).await
        }
        Err(e) => Err(e),
    };
    state.respond(result)
}

async fn post_export(State(state): State<AppState>, body: Bytes) -> Response {
    let result = parse_body::<Animation>(&body).and_then(|anim| {
        let text = emit_qanim(&anim).map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(json!({"qanim": text}))
    });
    state.respond(result)
}

async fn list_lexicon(State(state): State<AppState>) -> Response {
    let result = sign_files(&state.config().lexicon_dir).map_err(ApiError::from).map(|files| {
        let glosses: Vec<String> = files
            .iter()
            .filter_map(|p| p.file_name()?.to_str()?.strip_suffix(SIGN_SUFFIX).map(str::to_string))
            .collect();
        json!({"glosses": glosses})
    });
    state.respond(result)
}

async fn get_sign(State(state): State<AppState>, Path(gloss): Path<String>) -> Response {
    let result = async {
        checked_gloss(&gloss)?;
        let path = sign_path(&state.config().lexicon_dir, &gloss);
        let lock = state.gloss_lock(&gloss);
        let _guard = lock.lock().await;
        match tokio::fs::read_to_string(&path).await {
            Ok(text) => serde_json::from_str::<Value>(&text).map_err(|e| ApiError::internal(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::unknown_gloss(&gloss)),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }
    .await;
    state.respond(result)
}

async fn put_sign(State(state): State<AppState>, Path(gloss): Path<String>, body: Bytes) -> Response {
    let result = async {
        checked_gloss(&gloss)?;
        let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
        let sign = parse_sign(text)?;
        if sign.gloss != gloss {
            return Err(ApiError::bad_request(format!("document gloss `{}` does not match `{gloss}`", sign.gloss)));
        }
        let config = state.config();
        let diagnostics = validate_sign(&sign, &config.chain, &config.compile.keepout);
        let path = sign_path(&config.lexicon_dir, &gloss);
        let lock = state.gloss_lock(&gloss);
        let _guard = lock.lock().await;
        let created = !path.exists();
        let bytes = body.clone();
        tokio::task::spawn_blocking(move || write_atomic(&path, &bytes))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(json!({"gloss": gloss, "created": created, "diagnostics": to_value(&diagnostics)?}))
    }
    .await;
    state.respond(result)
}

async fn delete_sign(State(state): State<AppState>, Path(gloss): Path<String>) -> Response {
    let result = async {
        checked_gloss(&gloss)?;
        let path = sign_path(&state.config().lexicon_dir, &gloss);
        let lock = state.gloss_lock(&gloss);
        let _guard = lock.lock().await;
        match tokio::fs::remove_file(&path).await {
            Ok(()) => Ok(json!({"gloss": gloss, "deleted": true})),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::unknown_gloss(&gloss)),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }
    .await;
    state.respond(result)
}

fn compose_sentence(state: &AppState, doc: SentenceDocument) -> ApiResult {
    let sentence = GlossSentence::from_document(doc).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let config = state.config();
    let mut signs = BTreeMap::new();
    for gloss in &sentence.glosses {
        if signs.contains_key(gloss) {
            continue;
        }
        checked_gloss(gloss)?;
        let path = sign_path(&config.lexicon_dir, gloss);
        if !path.is_file() {
            return Err(ApiError::unknown_gloss(gloss));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| ApiError::internal(e.to_string()))?;
        let sign = parse_sign(&text)?;
        let (anim, _) = compile_sign(&sign, &config.chain, &config.mirror_map, &config.compile)?;
        signs.insert(gloss.clone(), anim);
    }
    let animation = compose(&sentence, &signs, &config.compose).map_err(|e| match e {
        SentenceError::UnknownGloss(g) => ApiError::unknown_gloss(&g),
        other => ApiError::bad_request(other.to_string()),
    })?;
    Ok(json!({"animation": to_value(&animation)?}))
}

async fn post_sentence(State(state): State<AppState>, body: Bytes) -> Response {
    let result = match parse_body::<SentenceDocument>(&body) {
        Ok(doc) => {
            let s = state.clone();
            blocking(move || compose_sentence(&s, doc)).await
        }
        Err(e) => Err(e),
    };
    state.respond(result)
}

pub fn router(state: AppState) -> Router {
    let ui_dir = state.config().ui_dir.clone().filter(|d| d.is_dir());
    let api = Router::new()
        .route("/model", get(get_model))
        .route("/ik", post(post_ik))
        .route("/compile", post(post_compile))
        .route("/sample", post(post_sample))
        .route("/export", post(post_export))
        .route("/lexicon", get(list_lexicon))
        .route("/lexicon/{gloss}", get(get_sign).put(put_sign).delete(delete_sign))
        .route("/sentence", post(post_sentence))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(config))).await
}

//! JSON-over-HTTP facade for parsing, pointing and reasoning.
//!
//! Handlers are pure functions of the request and the state loaded at
//! startup; nothing is mutated while serving.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use ref_nsm::reasoner::TraceStep;
use ref_nsm::{Engine, Error, ModelParams, Pointing, PointingResult, ReasoningProgram, Scene};

pub struct AppState {
    pub engine: Engine,
    pub params: ModelParams,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/vocab", get(vocab))
        .route("/api/parse", post(parse))
        .route("/api/reason", post(reason))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves the API on an already-bound listener until the process exits.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Json { .. } | Error::Format(_) | Error::Line { .. } => StatusCode::BAD_REQUEST,
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

/// Decodes a JSON body; empty or malformed bodies are client errors.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError(StatusCode::BAD_REQUEST, "request body is empty".into()));
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("invalid request: {e}")))
}

async fn health() -> Json<Value> {
    Json(json!({ "ok": true }))
}

async fn vocab(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::to_value(&state.engine.lexicon).expect("lexicon serializes"))
}

#[derive(Deserialize)]
struct ParseRequest {
    instruction: String,
    #[serde(default)]
    conllu: Option<String>,
}

async fn parse(State(state): State<Arc<AppState>>, bytes: Bytes) -> Result<Json<ReasoningProgram>, ApiError> {
    let req: ParseRequest = body(&bytes)?;
    Ok(Json(state.engine.compile(&req.instruction, req.conllu.as_deref())?))
}

#[derive(Deserialize)]
pub struct ReasonRequest {
    pub scene: Scene,
    pub instruction: String,
    #[serde(default)]
    pub conllu: Option<String>,
    #[serde(default)]
    pub pointing: Option<Pointing>,
    #[serde(default)]
    pub options: ReasonOptions,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(default)]
pub struct ReasonOptions {
    pub no_gesture: bool,
    pub trace: bool,
    pub temperature: Option<f64>,
}

#[derive(Serialize)]
pub struct ReasonResponse {
    pub prediction: String,
    pub node_ids: Vec<String>,
    pub final_p: Vec<f64>,
    pub program: ReasoningProgram,
    pub pointing: Option<PointingResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceStep>>,
}

async fn reason(State(state): State<Arc<AppState>>, bytes: Bytes) -> Result<Json<ReasonResponse>, ApiError> {
    let req: ReasonRequest = body(&bytes)?;
    let engine = &state.engine;
    let mut params = state.params.clone();
    if let Some(t) = req.options.temperature {
        params.temperature = t;
        params.validate()?;
    }
    req.scene.validate_tokens(&engine.lexicon)?;
    let program = engine.compile(&req.instruction, req.conllu.as_deref())?;
    let pointing = match (&req.pointing, req.options.no_gesture) {
        (Some(p), false) => Some(engine.point(&req.scene, p)?),
        _ => None,
    };
    let trace = engine.reason(&req.scene, &program, pointing.as_ref(), &params)?;
    Ok(Json(ReasonResponse {
        prediction: trace.prediction.clone(),
        final_p: trace.final_p().to_vec(),
        p0: req.options.trace.then(|| trace.p0.clone()),
        node_ids: trace.node_ids,
        program,
        pointing,
        trace: req.options.trace.then_some(trace.steps),
    }))
}

//! HTTP/JSON interface over a [`Store`].
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/datasets` | CSV body, `?name=&positive=` | 201 dataset descriptor |
//! | GET | `/datasets` | | descriptors |
//! | GET | `/datasets/{id}` | | descriptor |
//! | POST | `/runs` | [`RunRequest`] | 201 run snapshot |
//! | GET | `/runs` | | run snapshots |
//! | GET | `/runs/{id}` | | run snapshot |
//! | POST | `/runs/{id}/commands` | [`ControlCommand`] | status after the command |
//! | GET | `/runs/{id}/trials` | `?since=` | trials above the watermark |
//! | GET | `/runs/{id}/summary` | `?top_k=` | overview |
//! | GET | `/runs/{id}/summary/algorithms` | | algorithm summaries |
//! | GET | `/runs/{id}/summary/hyperpartitions` | `?algorithm=` | hyperpartition summaries |
//! | GET | `/runs/{id}/summary/scatter` | `?scope=&hyperparameter=` | scatter series |
//! | GET | `/runs/{id}/focus` | `?top_k=` | focus sets |
//! | GET | `/runs/{id}/space` | | current space and per-hyperpartition ranges |
//! | GET | `/runs/{id}/log` | | raw JSON-lines log |
//!
//! Every failure is a JSON body `{code, message, detail}` whose status is
//! fixed by the code; see [`ErrorCode::http_status`].

use std::collections::HashMap;
use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ErrorCode, Rejection};
use crate::orchestrator::{ControlCommand, Trial};
use crate::service::{RunRequest, RunSnapshot, Store};
use crate::space::{Interval, Scale, SearchSpace};
use crate::summary;

/// Wire form of a rejection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Option<Value>,
}

impl From<ApiError> for Rejection {
    fn from(e: ApiError) -> Self {
        Rejection {
            code: e.code,
            message: e.message,
            detail: e.detail,
        }
    }
}

struct Failure(Rejection);

impl From<Rejection> for Failure {
    fn from(r: Rejection) -> Self {
        Failure(r)
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.code.http_status()).expect("valid status");
        let body = ApiError {
            code: self.0.code,
            message: self.0.message,
            detail: self.0.detail,
        };
        (status, Json(body)).into_response()
    }
}

type Reply<T> = Result<T, Failure>;
type Params = Query<HashMap<String, String>>;

fn bad_request(message: impl Into<String>) -> Failure {
    Failure(Rejection::new(ErrorCode::BadRequest, message))
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Reply<T> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))
}

fn number(params: &HashMap<String, String>, key: &str, default: u64) -> Reply<u64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| bad_request(format!("{key} must be a non-negative integer"))),
    }
}

fn required<'a>(params: &'a HashMap<String, String>, key: &str) -> Reply<&'a str> {
    params
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| bad_request(format!("missing query parameter {key}")))
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/datasets", post(add_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/commands", post(command))
        .route("/runs/{id}/trials", get(trials))
        .route("/runs/{id}/summary", get(overview))
        .route("/runs/{id}/summary/algorithms", get(algorithms))
        .route("/runs/{id}/summary/hyperpartitions", get(hyperpartitions))
        .route("/runs/{id}/summary/scatter", get(scatter))
        .route("/runs/{id}/focus", get(focus))
        .route("/runs/{id}/space", get(space))
        .route("/runs/{id}/log", get(log))
        .fallback(|| async { bad_request("no such endpoint") })
        .with_state(store)
}

/// Serves until `shutdown` resolves, then pauses every run and waits for
/// in-flight trials so each log ends on a record boundary.
pub async fn serve(
    store: Arc<Store>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    tokio::task::spawn_blocking(move || store.shutdown())
        .await
        .map_err(std::io::Error::other)
}

async fn add_dataset(State(store): State<Arc<Store>>, Query(q): Params, body: Bytes) -> Reply<impl IntoResponse> {
    let name = q.get("name").map_or("dataset", String::as_str);
    let d = store.add_dataset(&body, name, q.get("positive").map(String::as_str))?;
    Ok((StatusCode::CREATED, Json(d)))
}

async fn list_datasets(State(store): State<Arc<Store>>) -> impl IntoResponse {
    Json(store.datasets())
}

async fn get_dataset(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<impl IntoResponse> {
    Ok(Json(store.dataset(&id)?.descriptor()))
}

async fn create_run(State(store): State<Arc<Store>>, body: Bytes) -> Reply<impl IntoResponse> {
    let req: RunRequest = parse_json(&body)?;
    let handle = store.create_run(&req)?;
    Ok((StatusCode::CREATED, Json(handle.snapshot().as_ref().clone())))
}

async fn list_runs(State(store): State<Arc<Store>>) -> impl IntoResponse {
    let runs: Vec<RunSnapshot> = store.runs().iter().map(|s| s.as_ref().clone()).collect();
    Json(runs)
}

fn snapshot(store: &Store, id: &str) -> Reply<Arc<RunSnapshot>> {
    Ok(store.run(id)?.snapshot())
}

async fn get_run(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<impl IntoResponse> {
    Ok(Json(snapshot(&store, &id)?.as_ref().clone()))
}

/// Response of `POST /runs/{id}/commands`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReply {
    pub status: String,
    pub queued: bool,
    pub run: RunSnapshot,
}

async fn command(State(store): State<Arc<Store>>, Path(id): Path<String>, body: Bytes) -> Reply<impl IntoResponse> {
    let cmd: ControlCommand = parse_json(&body)?;
    let handle = store.run(&id)?;
    let outcome = handle.command(cmd)?;
    Ok(Json(CommandReply {
        status: outcome.status,
        queued: outcome.queued,
        run: handle.snapshot().as_ref().clone(),
    }))
}

/// Response of `GET /runs/{id}/trials`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPage {
    pub trials: Vec<Trial>,
    pub latest_trial_id: u64,
}

async fn trials(State(store): State<Arc<Store>>, Path(id): Path<String>, Query(q): Params) -> Reply<impl IntoResponse> {
    let since = number(&q, "since", 0)?;
    let snap = snapshot(&store, &id)?;
    Ok(Json(TrialPage {
        trials: snap.trials_since(since).to_vec(),
        latest_trial_id: snap.latest_trial_id(),
    }))
}

async fn overview(State(store): State<Arc<Store>>, Path(id): Path<String>, Query(q): Params) -> Reply<impl IntoResponse> {
    let top_k = number(&q, "top_k", summary::DEFAULT_TOP_K as u64)? as usize;
    let snap = snapshot(&store, &id)?;
    Ok(Json(summary::overview(&snap.trials, &snap.run.space, top_k)))
}

async fn algorithms(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<impl IntoResponse> {
    let snap = snapshot(&store, &id)?;
    Ok(Json(summary::algorithm_summaries(&snap.trials, &snap.run.space)))
}

async fn hyperpartitions(State(store): State<Arc<Store>>, Path(id): Path<String>, Query(q): Params) -> Reply<impl IntoResponse> {
    let snap = snapshot(&store, &id)?;
    let list = summary::hyperpartition_summaries(&snap.trials, &snap.run.space, q.get("algorithm").map(String::as_str))?;
    Ok(Json(list))
}

async fn scatter(State(store): State<Arc<Store>>, Path(id): Path<String>, Query(q): Params) -> Reply<impl IntoResponse> {
    let scope = required(&q, "scope")?;
    let hyperparameter = required(&q, "hyperparameter")?;
    let snap = snapshot(&store, &id)?;
    Ok(Json(summary::scatter(&snap.trials, &snap.run.space, scope, hyperparameter)?))
}

async fn focus(State(store): State<Arc<Store>>, Path(id): Path<String>, Query(q): Params) -> Reply<impl IntoResponse> {
    let top_k = number(&q, "top_k", summary::DEFAULT_TOP_K as u64)? as usize;
    let snap = snapshot(&store, &id)?;
    Ok(Json(summary::focus_filter(&snap.trials, top_k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunableView {
    pub name: String,
    pub scale: Scale,
    pub declared: Interval,
    pub active: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperpartitionView {
    pub id: String,
    pub algorithm: String,
    pub enabled: bool,
    pub tunables: Vec<TunableView>,
}

/// Response of `GET /runs/{id}/space`: the raw space plus a resolved view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceView {
    pub version: u64,
    pub space: SearchSpace,
    pub hyperpartitions: Vec<HyperpartitionView>,
}

pub fn space_view(space: &SearchSpace, version: u64) -> SpaceView {
    let hyperpartitions = space
        .hyperpartitions()
        .into_iter()
        .map(|hp| HyperpartitionView {
            enabled: space.is_enabled(&hp),
            tunables: hp
                .tunables
                .iter()
                .map(|t| TunableView {
                    name: t.name.clone(),
                    scale: t.scale,
                    declared: t.declared(),
                    active: space.active_interval(&hp.id, t),
                })
                .collect(),
            id: hp.id,
            algorithm: hp.algorithm,
        })
        .collect();
    SpaceView {
        version,
        space: space.clone(),
        hyperpartitions,
    }
}

async fn space(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<impl IntoResponse> {
    let snap = snapshot(&store, &id)?;
    Ok(Json(space_view(&snap.run.space, snap.space_version)))
}

async fn log(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<impl IntoResponse> {
    let text = store.run(&id)?.log_text();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text))
}

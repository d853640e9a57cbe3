//! Typed client for the HTTP API.
//!
//! The same calls work against a remote server or against an in-process
//! router over a local store, so the CLI has exactly one code path.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower::ServiceExt;

use crate::api::{self, ApiError, CommandReply, SpaceView, TrialPage};
use crate::data::DatasetDescriptor;
use crate::error::{ErrorCode, Rejection, Result};
use crate::orchestrator::ControlCommand;
use crate::service::{RunRequest, RunSnapshot, Store};
use crate::summary::{AlgorithmSummary, Focus, HyperpartitionSummary, Overview, ScatterSeries};

pub enum ApiClient {
    Remote { base: String, http: reqwest::Client },
    Local { router: Router, store: Arc<Store> },
}

fn transport(e: impl std::fmt::Display) -> Rejection {
    Rejection::new(ErrorCode::Io, e.to_string())
}

fn encode(value: &str) -> String {
    let mut out = String::new();
    for b in value.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

impl ApiClient {
    pub fn remote(base: &str) -> Self {
        ApiClient::Remote {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn local(store: Arc<Store>) -> Self {
        ApiClient::Local {
            router: api::router(store.clone()),
            store,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, ApiClient::Local { .. })
    }

    /// Pauses local runs and waits for their in-flight trials. No-op when remote.
    pub fn close(&self) {
        if let ApiClient::Local { store, .. } = self {
            store.shutdown();
        }
    }

    async fn send(&self, method: Method, path: &str, body: Vec<u8>, content_type: &str) -> Result<(u16, Vec<u8>)> {
        match self {
            ApiClient::Remote { base, http } => {
                let resp = http
                    .request(method, format!("{base}{path}"))
                    .header("content-type", content_type)
                    .body(body)
                    .send()
                    .await
                    .map_err(transport)?;
                let status = resp.status().as_u16();
                let bytes = resp.bytes().await.map_err(transport)?;
                Ok((status, bytes.to_vec()))
            }
            ApiClient::Local { router, .. } => {
                let req = Request::builder()
                    .method(method)
                    .uri(path)
                    .header("content-type", content_type)
                    .body(Body::from(body))
                    .map_err(transport)?;
                let resp = router.clone().oneshot(req).await.map_err(transport)?;
                let status = resp.status().as_u16();
                let bytes = resp.into_body().collect().await.map_err(transport)?.to_bytes();
                Ok((status, bytes.to_vec()))
            }
        }
    }

    async fn call_raw(&self, method: Method, path: &str, body: Vec<u8>, content_type: &str) -> Result<Vec<u8>> {
        let (status, bytes) = self.send(method, path, body, content_type).await?;
        if (200..300).contains(&status) {
            return Ok(bytes);
        }
        match serde_json::from_slice::<ApiError>(&bytes) {
            Ok(e) => Err(e.into()),
            Err(_) => Err(Rejection::new(
                ErrorCode::Io,
                format!("HTTP {status}: {}", String::from_utf8_lossy(&bytes)),
            )),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let bytes = self.call_raw(Method::GET, path, Vec::new(), "application/json").await?;
        serde_json::from_slice(&bytes).map_err(transport)
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let body = serde_json::to_vec(body).map_err(transport)?;
        let bytes = self.call_raw(Method::POST, path, body, "application/json").await?;
        serde_json::from_slice(&bytes).map_err(transport)
    }

    pub async fn add_dataset(&self, csv: Vec<u8>, name: &str) -> Result<DatasetDescriptor> {
        let path = format!("/datasets?name={}", encode(name));
        let bytes = self.call_raw(Method::POST, &path, csv, "text/csv").await?;
        serde_json::from_slice(&bytes).map_err(transport)
    }

    pub async fn datasets(&self) -> Result<Vec<DatasetDescriptor>> {
        self.get("/datasets").await
    }

    pub async fn dataset(&self, id: &str) -> Result<DatasetDescriptor> {
        self.get(&format!("/datasets/{}", encode(id))).await
    }

    pub async fn create_run(&self, req: &RunRequest) -> Result<RunSnapshot> {
        self.post("/runs", req).await
    }

    pub async fn runs(&self) -> Result<Vec<RunSnapshot>> {
        self.get("/runs").await
    }

    pub async fn run(&self, id: &str) -> Result<RunSnapshot> {
        self.get(&format!("/runs/{}", encode(id))).await
    }

    pub async fn command(&self, id: &str, cmd: &ControlCommand) -> Result<CommandReply> {
        self.post(&format!("/runs/{}/commands", encode(id)), cmd).await
    }

    pub async fn trials(&self, id: &str, since: u64) -> Result<TrialPage> {
        self.get(&format!("/runs/{}/trials?since={since}", encode(id))).await
    }

    pub async fn overview(&self, id: &str, top_k: usize) -> Result<Overview> {
        self.get(&format!("/runs/{}/summary?top_k={top_k}", encode(id))).await
    }

    pub async fn algorithms(&self, id: &str) -> Result<Vec<AlgorithmSummary>> {
        self.get(&format!("/runs/{}/summary/algorithms", encode(id))).await
    }

    pub async fn hyperpartitions(&self, id: &str, algorithm: Option<&str>) -> Result<Vec<HyperpartitionSummary>> {
        let filter = algorithm.map(|a| format!("?algorithm={}", encode(a))).unwrap_or_default();
        self.get(&format!("/runs/{}/summary/hyperpartitions{filter}", encode(id))).await
    }

    pub async fn scatter(&self, id: &str, scope: &str, hyperparameter: &str) -> Result<ScatterSeries> {
        self.get(&format!(
            "/runs/{}/summary/scatter?scope={}&hyperparameter={}",
            encode(id),
            encode(scope),
            encode(hyperparameter)
        ))
        .await
    }

    pub async fn focus(&self, id: &str, top_k: usize) -> Result<Focus> {
        self.get(&format!("/runs/{}/focus?top_k={top_k}", encode(id))).await
    }

    pub async fn space(&self, id: &str) -> Result<SpaceView> {
        self.get(&format!("/runs/{}/space", encode(id))).await
    }

    pub async fn log(&self, id: &str) -> Result<String> {
        let bytes = self
            .call_raw(Method::GET, &format!("/runs/{}/log", encode(id)), Vec::new(), "application/json")
            .await?;
        String::from_utf8(bytes).map_err(transport)
    }

    /// Polls until the run is neither running nor pausing.
    pub async fn wait_for(&self, id: &str, every: Duration) -> Result<RunSnapshot> {
        loop {
            let snap = self.run(id).await?;
            if !matches!(snap.reported_status.as_str(), "running" | "pausing") {
                return Ok(snap);
            }
            tokio::time::sleep(every).await;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_encoding() {
        assert_eq!(encode("KNN:weights=uniform,metric=euclidean"), "KNN%3Aweights%3Duniform%2Cmetric%3Deuclidean");
        assert_eq!(encode("a b"), "a%20b");
    }
}

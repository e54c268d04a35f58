//! Minimal JSON-over-HTTP client for the gateway API.

use std::time::Duration;

use serde_json::{json, Value as Json};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: Json,
    pub location: Option<String>,
}

impl Reply {
    pub fn is_ok(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// The error code of an error reply.
    pub fn code(&self) -> Option<&str> {
        self.body.get("error").and_then(Json::as_str)
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{method} {path}: {source}")]
    Transport { method: String, path: String, source: reqwest::Error },
    #[error("{method} {path} answered {status}: {body}")]
    Status { method: String, path: String, status: u16, body: Json },
}

#[derive(Clone)]
pub struct Api {
    base: String,
    http: reqwest::Client,
}

impl Api {
    pub fn new(base: impl Into<String>) -> Api {
        let http = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client");
        Api { base: base.into().trim_end_matches('/').to_string(), http }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub async fn send(&self, method: &str, path: &str, token: Option<&str>, body: Option<&Json>) -> Result<Reply, ApiError> {
        let transport = |source| ApiError::Transport { method: method.into(), path: path.into(), source };
        let m: reqwest::Method = method.parse().expect("valid method");
        let mut req = self.http.request(m, format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status().as_u16();
        let location = resp.headers().get("location").and_then(|v| v.to_str().ok()).map(str::to_string);
        let bytes = resp.bytes().await.map_err(transport)?;
        let body = if bytes.is_empty() { Json::Null } else { serde_json::from_slice(&bytes).unwrap_or(Json::Null) };
        Ok(Reply { status, body, location })
    }

    /// Sends and insists on a 2xx reply.
    pub async fn expect(&self, method: &str, path: &str, token: Option<&str>, body: Option<&Json>) -> Result<Json, ApiError> {
        let r = self.send(method, path, token, body).await?;
        if r.is_ok() {
            Ok(r.body)
        } else {
            Err(ApiError::Status { method: method.into(), path: path.into(), status: r.status, body: r.body })
        }
    }

    pub async fn login(&self, user: &str, password: &str) -> Result<String, ApiError> {
        let body = self.expect("POST", "/api/login", None, Some(&json!({"username": user, "password": password}))).await?;
        Ok(body["token"].as_str().unwrap_or_default().to_string())
    }

    pub async fn healthy(&self) -> bool {
        matches!(self.send("GET", "/api/health", None, None).await, Ok(r) if r.status == 200)
    }
}

//! The web tier: authenticates browsers, turns each HTTP route into one
//! middleware invocation and serves the portal's static assets.
//!
//! The gateway keeps no state beyond cached servant references. Sessions,
//! authorization answers and every business outcome come from the
//! application tier; the gateway only converts between JSON and contract
//! values and maps error codes to HTTP statuses through the shared table.

pub mod json;
pub mod routes;
mod upstream;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, RawPathParams, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{any, get, on, MethodFilter, MethodRouter};
use axum::Router;
use cis_domain::contract;
use cis_middleware::{split_endpoint, Client, ClientConfig, IdlDocument, ObjectRef, Value};
use log::{debug, info, warn};
use serde_json::{json, Value as Json};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

pub use routes::{Body, Route, SessionEffect, ROUTES};
pub use upstream::Upstream;

pub const SESSION_COOKIE: &str = "fnucis_session";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub listen: String,
    pub registry: String,
    /// Directory of portal assets served for non-API paths.
    pub assets: Option<PathBuf>,
    /// Target of the HR redirect.
    pub hr_url: String,
    pub timeout_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            listen: "127.0.0.1:8080".into(),
            registry: "127.0.0.1:7100".into(),
            assets: None,
            hr_url: "https://hr.example.invalid/".into(),
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GatewayConfigError {
    #[error("unknown gateway key `{0}`")]
    UnknownKey(String),
    #[error("gateway key `{key}`: {message}")]
    Value { key: String, message: String },
}

impl GatewayConfig {
    /// Reads `listen`, `registry`, `assets`, `hr_url` and `timeout_ms`.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<GatewayConfig, GatewayConfigError> {
        let mut c = GatewayConfig::default();
        for (k, v) in map {
            let bad = |message: String| GatewayConfigError::Value { key: k.clone(), message };
            match k.as_str() {
                "listen" | "registry" => {
                    split_endpoint(v).map_err(bad)?;
                    if k == "listen" {
                        c.listen = v.clone();
                    } else {
                        c.registry = v.clone();
                    }
                }
                "assets" => c.assets = Some(PathBuf::from(v)),
                "hr_url" => c.hr_url = v.clone(),
                "timeout_ms" => {
                    c.timeout_ms = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| bad(format!("`{v}` is not a positive integer")))?
                }
                _ => return Err(GatewayConfigError::UnknownKey(k.clone())),
            }
        }
        Ok(c)
    }
}

/// An error reply: a code from the shared table plus a detail message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub code: String,
    pub detail: String,
}

impl ApiError {
    pub fn new(code: impl Into<String>, detail: impl Into<String>) -> ApiError {
        ApiError { code: code.into(), detail: detail.into() }
    }

    fn bad_request(detail: impl Into<String>) -> ApiError {
        ApiError::new("bad-request", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (entry, detail) = match contract::error_entry(&self.code) {
            Some(e) => (e, self.detail),
            None => (
                contract::error_entry("internal").expect("table lists internal"),
                format!("unlisted error code {}: {}", self.code, self.detail),
            ),
        };
        let status = StatusCode::from_u16(entry.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = json!({"error": entry.code, "message": entry.message, "detail": detail});
        (status, [(header::CACHE_CONTROL, "no-store")], axum::Json(body)).into_response()
    }
}

struct Ctx {
    upstream: Arc<Upstream>,
    doc: Arc<IdlDocument>,
    hr_url: String,
}

/// The session token from `Authorization: Bearer` or the session cookie.
pub fn session_token(headers: &HeaderMap) -> String {
    if let Some(t) = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
    {
        return t.trim().to_string();
    }
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(k, _)| *k == SESSION_COOKIE)
        .map(|(_, v)| v.to_string())
        .unwrap_or_default()
}

fn arguments(
    ctx: &Ctx,
    route: &Route,
    token: &str,
    path: &HashMap<String, String>,
    query: &HashMap<String, String>,
    body: &Bytes,
) -> Result<Vec<Value>, ApiError> {
    let doc = &ctx.doc;
    let sig = doc
        .method(route.interface, route.operation)
        .ok_or_else(|| ApiError::new("internal", format!("route to undeclared {}", route.capability())))?;
    let body: Option<Json> = match route.body {
        Body::None => None,
        _ if body.iter().all(u8::is_ascii_whitespace) => None,
        _ => Some(serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("body is not JSON: {e}")))?),
    };
    if let (Body::Fields, Some(b)) = (route.body, &body) {
        let obj = b.as_object().ok_or_else(|| ApiError::bad_request("body must be a JSON object"))?;
        if let Some(k) = obj.keys().find(|k| k.as_str() == "token" || !sig.params.iter().any(|p| &p.name == *k)) {
            return Err(ApiError::bad_request(format!("unexpected body field `{k}`")));
        }
    }
    let mut args = Vec::with_capacity(sig.params.len());
    for p in &sig.params {
        let name = p.name.as_str();
        let bad = |e: String| ApiError::bad_request(format!("{name}: {e}"));
        let from_body = match (route.body, &body) {
            (Body::Whole(n), b) if n == name => Some(b.clone().unwrap_or(Json::Null)),
            (Body::Fields, Some(b)) => b.get(name).cloned(),
            _ => None,
        };
        let v = if name == "token" && !route.public {
            Value::str(token)
        } else if let Some(s) = path.get(name) {
            json::from_text(s, &p.ty, doc).map_err(bad)?
        } else if let Some(j) = from_body {
            json::from_json(&j, &p.ty, doc).map_err(bad)?
        } else if let Some(s) = query.get(name) {
            json::from_text(s, &p.ty, doc).map_err(bad)?
        } else if matches!(p.ty, cis_middleware::IdlType::Optional(_)) {
            Value::Opt(None)
        } else {
            return Err(ApiError::bad_request(format!("missing parameter `{name}`")));
        };
        args.push(v);
    }
    Ok(args)
}

fn cookie(token: &str, max_age: Option<i64>) -> HeaderValue {
    let age = max_age.map(|s| format!("; Max-Age={s}")).unwrap_or_default();
    HeaderValue::from_str(&format!("{SESSION_COOKIE}={token}; Path=/; HttpOnly; SameSite=Strict{age}"))
        .unwrap_or_else(|_| HeaderValue::from_static("fnucis_session=; Path=/; Max-Age=0"))
}

async fn translate(
    ctx: &Ctx,
    route: &Route,
    headers: &HeaderMap,
    path: HashMap<String, String>,
    query: HashMap<String, String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let token = session_token(headers);
    let args = arguments(ctx, route, &token, &path, &query, &body)?;
    if !route.public {
        ctx.upstream.call("auth", "authorize", vec![Value::str(&token), Value::str(route.capability())]).await?;
    }
    let reply = ctx.upstream.call(route.service, route.operation, args).await?;
    let sig = ctx.doc.method(route.interface, route.operation).expect("checked in arguments");
    let out = json::to_json(&reply, &sig.returns, &ctx.doc).map_err(|e| ApiError::new("upstream-failed", e))?;
    let mut resp = (StatusCode::OK, [(header::CACHE_CONTROL, "no-store")], axum::Json(&out)).into_response();
    match route.session {
        SessionEffect::None => {}
        SessionEffect::Set => {
            let t = out.get("token").and_then(Json::as_str).unwrap_or_default();
            resp.headers_mut().insert(header::SET_COOKIE, cookie(t, None));
        }
        SessionEffect::Clear => {
            resp.headers_mut().insert(header::SET_COOKIE, cookie("", Some(0)));
        }
    }
    Ok(resp)
}

fn method_filter(m: &str) -> MethodFilter {
    match m {
        "GET" => MethodFilter::GET,
        "POST" => MethodFilter::POST,
        "PUT" => MethodFilter::PUT,
        "DELETE" => MethodFilter::DELETE,
        other => panic!("route method {other} not supported"),
    }
}

fn endpoint(route: &'static Route) -> MethodRouter<Arc<Ctx>> {
    on(
        method_filter(route.method),
        move |State(ctx): State<Arc<Ctx>>,
              params: RawPathParams,
              Query(query): Query<HashMap<String, String>>,
              headers: HeaderMap,
              body: Bytes| async move {
            let path: HashMap<String, String> = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            match translate(&ctx, route, &headers, path, query, body).await {
                Ok(r) => r,
                Err(e) => {
                    debug!("{} {} -> {}: {}", route.method, route.path, e.code, e.detail);
                    e.into_response()
                }
            }
        },
    )
}

async fn not_found(method: Method, uri: axum::http::Uri) -> ApiError {
    ApiError::new("not-found", format!("no route for {method} {}", uri.path()))
}

/// The full HTTP application over `upstream`.
pub fn router(upstream: Arc<Upstream>, config: &GatewayConfig) -> Router {
    let ctx = Arc::new(Ctx { upstream, doc: contract::doc(), hr_url: config.hr_url.clone() });
    let mut by_path: BTreeMap<&str, MethodRouter<Arc<Ctx>>> = BTreeMap::new();
    for route in ROUTES {
        let m = endpoint(route);
        let merged = match by_path.remove(route.path) {
            Some(existing) => existing.merge(m),
            None => m,
        };
        by_path.insert(route.path, merged);
    }
    let mut app = Router::new();
    for (path, m) in by_path {
        app = app.route(path, m);
    }
    app = app
        .route("/api/health", get(|| async { axum::Json(json!({"status": "ok"})) }))
        .route(
            "/api/hr",
            get(|State(ctx): State<Arc<Ctx>>| async move {
                (StatusCode::FOUND, [(header::LOCATION, ctx.hr_url.clone())]).into_response()
            }),
        )
        .route("/api", any(not_found))
        .route("/api/{*rest}", any(not_found));
    let app = match &config.assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(not_found),
    };
    app.with_state(ctx)
}

pub struct GatewayHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<()>,
    warmer: JoinHandle<()>,
}

impl GatewayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Stops accepting, lets in-flight requests finish and returns.
    pub async fn stop(mut self) {
        self.warmer.abort();
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.server).await;
    }
}

impl Drop for GatewayHandle {
    fn drop(&mut self) {
        self.warmer.abort();
        self.server.abort();
    }
}

#[derive(Debug, Error)]
pub enum StartError {
    #[error("bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("{0}")]
    Config(String),
}

/// Binds `config.listen` and starts serving. Servant references are resolved
/// in the background, retrying with backoff while the registry is down;
/// until then API routes answer 503.
pub async fn start(config: &GatewayConfig) -> Result<GatewayHandle, StartError> {
    let registry = ObjectRef::naming_at(&config.registry).map_err(StartError::Config)?;
    let client_config = ClientConfig { timeout: Duration::from_millis(config.timeout_ms), ..ClientConfig::default() };
    let client = Client::with_config(contract::doc(), client_config);
    let listener = TcpListener::bind(&config.listen)
        .await
        .map_err(|source| StartError::Bind { addr: config.listen.clone(), source })?;
    let addr = listener.local_addr().map_err(|source| StartError::Bind { addr: config.listen.clone(), source })?;

    let upstream = Arc::new(Upstream::new(client, registry));
    let warm_upstream = upstream.clone();
    let app = router(upstream, config);
    let warmer = tokio::spawn(async move {
        let mut services: Vec<&'static str> = ROUTES.iter().map(|r| r.service).collect();
        services.sort_unstable();
        services.dedup();
        let mut delay = Duration::from_millis(100);
        loop {
            match warm_upstream.client().ping(&warm_upstream.registry().endpoint()).await {
                Ok(()) => {
                    warm_upstream.warm(&services).await;
                    break;
                }
                Err(e) => {
                    warn!("registry {} unreachable: {e}; retrying in {delay:?}", warm_upstream.registry().endpoint());
                    tokio::time::sleep(delay).await;
                    delay = (delay * 2).min(Duration::from_secs(5));
                }
            }
        }
    });
    let (tx, rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = rx.await;
        });
        if let Err(e) = serve.await {
            warn!("gateway stopped: {e}");
        }
    });
    info!("gateway on {addr}");
    Ok(GatewayHandle { addr, shutdown: Some(tx), server, warmer })
}

//! Servant references resolved through the registry, cached and swapped
//! when a tier moves.

use std::collections::HashMap;

use cis_middleware::{codes, Client, ObjectRef, RpcError, Value};
use log::{debug, info};
use tokio::sync::RwLock;

use crate::ApiError;

pub struct Upstream {
    client: Client,
    registry: ObjectRef,
    refs: RwLock<HashMap<String, ObjectRef>>,
}

fn unavailable(detail: impl Into<String>) -> ApiError {
    ApiError::new("service-unavailable", detail)
}

fn upstream_failed(e: &RpcError) -> ApiError {
    ApiError::new("upstream-failed", e.to_string())
}

impl Upstream {
    pub fn new(client: Client, registry: ObjectRef) -> Upstream {
        Upstream { client, registry, refs: RwLock::new(HashMap::new()) }
    }

    pub fn client(&self) -> &Client {
        &self.client
    }

    pub fn registry(&self) -> &ObjectRef {
        &self.registry
    }

    async fn resolve(&self, service: &str) -> Result<ObjectRef, ApiError> {
        match self.client.resolve(&self.registry, service).await {
            Ok(target) => {
                info!("{service} resolved to {}", target.endpoint());
                self.refs.write().await.insert(service.to_string(), target.clone());
                Ok(target)
            }
            Err(e) if e.is_unreachable() || matches!(e, RpcError::Timeout | RpcError::ConnectionLost) => {
                Err(unavailable(format!("registry: {e}")))
            }
            Err(RpcError::Remote(f)) if f.code == codes::NOT_BOUND => Err(unavailable(f.message)),
            Err(RpcError::Remote(f)) => Err(ApiError::new(f.code, f.message)),
            Err(e) => Err(upstream_failed(&e)),
        }
    }

    async fn target(&self, service: &str) -> Result<ObjectRef, ApiError> {
        if let Some(t) = self.refs.read().await.get(service) {
            return Ok(t.clone());
        }
        self.resolve(service).await
    }

    async fn forget(&self, service: &str) {
        self.refs.write().await.remove(service);
    }

    /// Resolves every name now so the first requests need no lookup.
    pub async fn warm(&self, services: &[&str]) {
        for &s in services {
            if let Err(e) = self.resolve(s).await {
                debug!("{s} not resolvable yet: {}", e.detail);
            }
        }
    }

    /// Invokes `method` on `service`. A connect failure means the request
    /// was never delivered, so it is retried once against a fresh lookup.
    pub async fn call(&self, service: &str, method: &str, args: Vec<Value>) -> Result<Value, ApiError> {
        let target = self.target(service).await?;
        match self.client.invoke(&target, method, args.clone()).await {
            Ok(v) => Ok(v),
            Err(RpcError::Remote(f)) => Err(ApiError::new(f.code, f.message)),
            Err(RpcError::BadArguments(m)) => Err(ApiError::new(codes::BAD_REQUEST, m)),
            Err(e @ RpcError::ConnectFailed { .. }) => {
                self.forget(service).await;
                let fresh = self.resolve(service).await?;
                if fresh == target {
                    return Err(upstream_failed(&e));
                }
                match self.client.invoke(&fresh, method, args).await {
                    Ok(v) => Ok(v),
                    Err(RpcError::Remote(f)) => Err(ApiError::new(f.code, f.message)),
                    Err(e) => {
                        self.forget(service).await;
                        Err(upstream_failed(&e))
                    }
                }
            }
            Err(e) => {
                self.forget(service).await;
                Err(upstream_failed(&e))
            }
        }
    }
}

#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use cis_domain::contract;
use cis_gateway::{GatewayConfig, GatewayHandle};
use cis_middleware::{Fault, MethodSignature, ObjectRef, Registry, Server, ServerHandle, Value};
use parking_lot::Mutex;

pub const SERVICES: [(&str, &str); 7] = [
    ("auth", "Auth"),
    ("admissions", "Admissions"),
    ("directory", "Directory"),
    ("enrollment", "Enrollments"),
    ("records", "Records"),
    ("finance", "Finance"),
    ("reporting", "Reporting"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub operation: String,
    pub args: Vec<Value>,
}

/// Servants that record every call and answer from a script.
pub struct Script {
    pub calls: Mutex<Vec<Call>>,
    pub authorize: Mutex<Result<Value, Fault>>,
    pub reply: Mutex<Result<Value, Fault>>,
}

impl Script {
    pub fn new() -> Arc<Script> {
        let principal = Value::record([("subject", Value::str("X")), ("role", Value::Enum(0))]);
        Arc::new(Script {
            calls: Mutex::new(vec![]),
            authorize: Mutex::new(Ok(principal)),
            reply: Mutex::new(Err(Fault::new("internal", "unscripted"))),
        })
    }

    pub fn take_calls(&self) -> Vec<Call> {
        std::mem::take(&mut *self.calls.lock())
    }
}

pub struct Tier {
    pub registry: Arc<Registry>,
    pub registry_server: ServerHandle,
    pub server: ServerHandle,
}

/// Scripted servants for every service name on one server.
pub async fn serve_scripted(script: Arc<Script>) -> ServerHandle {
    let mut server = Server::new(contract::doc());
    for (name, iface) in SERVICES {
        let s = script.clone();
        server = server
            .servant(name, iface, move |m: &MethodSignature, args: Vec<Value>| {
                let operation = format!("{iface}.{}", m.name);
                s.calls.lock().push(Call { operation: operation.clone(), args });
                if operation == "Auth.authorize" {
                    s.authorize.lock().clone()
                } else {
                    s.reply.lock().clone()
                }
            })
            .unwrap();
    }
    server.serve("127.0.0.1:0").await.unwrap()
}

pub fn bind_all(registry: &Registry, port: u16) {
    for (name, iface) in SERVICES {
        registry.bind(name, ObjectRef::new("127.0.0.1", port, name, iface));
    }
}

/// A registry server plus scripted servants bound in it.
pub async fn scripted_tier(script: Arc<Script>) -> Tier {
    let registry = Arc::new(Registry::new());
    let registry_server =
        Server::new(contract::doc()).naming(registry.clone()).unwrap().serve("127.0.0.1:0").await.unwrap();
    let server = serve_scripted(script).await;
    bind_all(&registry, server.port());
    Tier { registry, registry_server, server }
}

/// A registry with nothing bound.
pub async fn empty_registry() -> ServerHandle {
    Server::new(contract::doc()).naming(Arc::new(Registry::new())).unwrap().serve("127.0.0.1:0").await.unwrap()
}

pub async fn gateway(registry_port: u16, assets: Option<&Path>) -> GatewayHandle {
    let config = GatewayConfig {
        listen: "127.0.0.1:0".into(),
        registry: format!("127.0.0.1:{registry_port}"),
        assets: assets.map(Path::to_path_buf),
        hr_url: "https://hr.test/portal".into(),
        timeout_ms: 5_000,
    };
    cis_gateway::start(&config).await.unwrap()
}

pub fn http() -> reqwest::Client {
    reqwest::Client::builder().redirect(reqwest::redirect::Policy::none()).build().unwrap()
}

pub fn url(g: &GatewayHandle, path: &str) -> String {
    format!("http://127.0.0.1:{}{path}", g.port())
}

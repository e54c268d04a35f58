//! The application tier: hosts one servant per contract interface over the
//! record store and publishes them in the name registry.

pub mod auth;
pub mod config;
pub mod service;
pub mod storage;

use std::sync::Arc;

use cis_domain::contract;
use cis_middleware::{split_endpoint, Client, ObjectRef, RpcError, ServeError, Server, ServerHandle};
use cis_store::{Store, StoreError, StoreOptions};
use log::info;
use thiserror::Error;

pub use config::{Config, ConfigError};
pub use service::{system_clock, App, AppError, Clock, Service};

/// Registry name, object name and interface of each published servant.
pub const SERVANTS: [(&str, &str); 7] = [
    ("auth", "Auth"),
    ("admissions", "Admissions"),
    ("directory", "Directory"),
    ("enrollment", "Enrollments"),
    ("records", "Records"),
    ("finance", "Finance"),
    ("reporting", "Reporting"),
];

#[derive(Debug, Error)]
pub enum StartError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("registry at {addr}: {source}")]
    Registry { addr: String, source: RpcError },
    #[error("{0}")]
    Config(String),
    #[error("bootstrap account: {0}")]
    Bootstrap(AppError),
}

pub struct AppServer {
    app: Arc<App>,
    handle: ServerHandle,
    advertised: String,
}

fn open_store(config: &Config) -> Result<Store, StoreError> {
    match &config.db_dir {
        Some(dir) => Store::open_with(dir, StoreOptions { sync: config.sync }),
        None => Store::open_from_env(),
    }
}

impl AppServer {
    pub async fn start(config: &Config) -> Result<AppServer, StartError> {
        Self::start_with_clock(config, system_clock()).await
    }

    /// Opens the store, serves every interface on `config.listen` and binds
    /// the servants in the registry.
    pub async fn start_with_clock(config: &Config, clock: Clock) -> Result<AppServer, StartError> {
        let store = open_store(config)?;
        let doc = contract::doc();
        let app = Arc::new(App::new(
            store,
            doc.clone(),
            config.policy.clone(),
            config.token_ttl_hours,
            config.hash_iterations,
            clock,
        ));
        let registry = ObjectRef::naming_at(&config.registry).map_err(StartError::Config)?;
        let (listen_host, _) = split_endpoint(&config.listen).map_err(StartError::Config)?;

        let result = async {
            if let Some(pw) = &config.admin_password {
                let bootstrap = app.clone();
                let (user, pw) = (config.admin_user.clone(), pw.clone());
                let created = tokio::task::spawn_blocking(move || bootstrap.bootstrap_admin(&user, &pw))
                    .await
                    .map_err(|e| StartError::Config(e.to_string()))?
                    .map_err(StartError::Bootstrap)?;
                if created {
                    info!("created bootstrap account {}", config.admin_user);
                }
            }
            let mut server = Server::new(doc.clone());
            for (object, iface) in SERVANTS {
                server = server.servant(object, iface, Service { app: app.clone(), interface: iface.to_string() })?;
            }
            let handle = server.serve(&config.listen).await?;
            let host = match &config.advertise_host {
                Some(h) => h.clone(),
                None if listen_host == "0.0.0.0" || listen_host == "::" => "127.0.0.1".to_string(),
                None => listen_host,
            };
            let client = Client::new(doc.clone());
            for (object, iface) in SERVANTS {
                let target = ObjectRef::new(host.clone(), handle.port(), object, iface);
                if let Err(source) = client.bind(&registry, object, &target).await {
                    handle.stop().await;
                    return Err(StartError::Registry { addr: config.registry.clone(), source });
                }
            }
            let advertised = format!("{host}:{}", handle.port());
            Ok(AppServer { app: app.clone(), handle, advertised })
        }
        .await;
        match result {
            Ok(s) => {
                info!("application server on {} ({})", s.handle.local_addr(), s.advertised);
                Ok(s)
            }
            Err(e) => {
                let _ = app.store().close();
                Err(e)
            }
        }
    }

    pub fn app(&self) -> &Arc<App> {
        &self.app
    }

    pub fn port(&self) -> u16 {
        self.handle.port()
    }

    /// `host:port` written into the registry.
    pub fn advertised(&self) -> &str {
        &self.advertised
    }

    pub async fn stop(self) -> Result<(), StoreError> {
        self.handle.stop().await;
        self.app.store().close()
    }
}

//! Starting and stopping the three tiers.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::process::Stdio;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cis_appserver::AppServer;
use cis_domain::contract;
use cis_gateway::GatewayHandle;
use cis_middleware::{split_endpoint, Client, ClientConfig, ObjectRef, Registry, ServeError, Server, ServerHandle};
use cis_store::StoreError;
use log::{info, warn};
use tempfile::NamedTempFile;
use thiserror::Error;
use tokio::process::{Child, Command};

use crate::api::Api;
use crate::plan::{Mode, Plan, PlanError};

const HEALTH_TIMEOUT: Duration = Duration::from_secs(30);
const STOP_GRACE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Registry,
    App,
    Gateway,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Registry, Tier::App, Tier::Gateway];
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Registry => "registry",
            Tier::App => "app",
            Tier::Gateway => "gateway",
        })
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Tier, String> {
        Tier::ALL.into_iter().find(|t| t.to_string() == s).ok_or_else(|| format!("unknown tier `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum DeployError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("registry: {0}")]
    Registry(#[from] ServeError),
    #[error("application server: {0}")]
    App(#[from] cis_appserver::StartError),
    #[error("gateway: {0}")]
    Gateway(#[from] cis_gateway::StartError),
    #[error("starting {tier}: {source}")]
    Spawn { tier: Tier, source: std::io::Error },
    #[error("{tier} exited: {status}")]
    TierExited { tier: Tier, status: String },
    #[error("{tier} not healthy after {secs}s")]
    HealthTimeout { tier: Tier, secs: u64 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// `host:port` a local client uses to reach a listen address.
pub fn reach(listen: &str, port: u16) -> String {
    let host = match split_endpoint(listen) {
        Ok((h, _)) if h != "0.0.0.0" && h != "::" && !h.is_empty() => h,
        _ => "127.0.0.1".into(),
    };
    format!("{host}:{port}")
}

fn fixed_port(listen: &str) -> u16 {
    split_endpoint(listen).map(|(_, p)| p).unwrap_or(0)
}

fn probe_client() -> Client {
    Client::with_config(contract::doc(), ClientConfig { timeout: Duration::from_secs(2), ..ClientConfig::default() })
}

async fn tier_healthy(tier: Tier, plan: &Plan, gateway_url: &str) -> bool {
    let client = probe_client();
    match tier {
        Tier::Registry => client.ping(&reach(&plan.registry, fixed_port(&plan.registry))).await.is_ok(),
        Tier::App => {
            let Ok(registry) = ObjectRef::naming_at(&plan.app.registry) else { return false };
            client.ping(&reach(&plan.app.listen, fixed_port(&plan.app.listen))).await.is_ok()
                && client.resolve(&registry, "auth").await.is_ok()
        }
        Tier::Gateway => Api::new(gateway_url).healthy().await,
    }
}

struct Proc {
    tier: Tier,
    child: Child,
}

enum Tiers {
    InProcess { registry: ServerHandle, app: AppServer, gateway: GatewayHandle },
    Processes { procs: Vec<Proc>, _plan: NamedTempFile },
}

/// A running deployment of all three tiers.
pub struct Deployment {
    mode: Mode,
    gateway_url: String,
    registry: String,
    tiers: Tiers,
}

impl Deployment {
    /// Starts every tier of `plan`. Distributed plans run each tier as a
    /// child process of `exe` (`exe tier <name> --plan <file>`).
    pub async fn start(plan: &Plan, exe: &Path) -> Result<Deployment, DeployError> {
        plan.validate()?;
        plan.check_ports()?;
        match plan.mode {
            Mode::Nondistributed => Self::start_in_process(plan).await,
            Mode::Distributed => Self::start_processes(plan, exe).await,
        }
    }

    async fn start_in_process(plan: &Plan) -> Result<Deployment, DeployError> {
        let registry = serve_registry(&plan.registry).await?;
        let registry_addr = reach(&plan.registry, registry.port());
        let mut app_config = plan.app.clone();
        app_config.registry = registry_addr.clone();
        let app = match AppServer::start(&app_config).await {
            Ok(a) => a,
            Err(e) => {
                registry.stop().await;
                return Err(e.into());
            }
        };
        let mut gw_config = plan.gateway.clone();
        gw_config.registry = registry_addr.clone();
        let gateway = match cis_gateway::start(&gw_config).await {
            Ok(g) => g,
            Err(e) => {
                let _ = app.stop().await;
                registry.stop().await;
                return Err(e.into());
            }
        };
        let gateway_url = format!("http://{}", reach(&plan.gateway.listen, gateway.port()));
        let d = Deployment {
            mode: plan.mode,
            gateway_url,
            registry: registry_addr,
            tiers: Tiers::InProcess { registry, app, gateway },
        };
        let deadline = Instant::now() + HEALTH_TIMEOUT;
        while !Api::new(&d.gateway_url).healthy().await {
            if Instant::now() > deadline {
                let _ = d.stop().await;
                return Err(DeployError::HealthTimeout { tier: Tier::Gateway, secs: HEALTH_TIMEOUT.as_secs() });
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        Ok(d)
    }

    async fn start_processes(plan: &Plan, exe: &Path) -> Result<Deployment, DeployError> {
        let mut file = NamedTempFile::new().map_err(|source| DeployError::Spawn { tier: Tier::Registry, source })?;
        file.write_all(plan.render().as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| DeployError::Spawn { tier: Tier::Registry, source })?;
        let gateway_url = format!("http://{}", reach(&plan.gateway.listen, fixed_port(&plan.gateway.listen)));
        let mut procs: Vec<Proc> = Vec::new();
        for tier in Tier::ALL {
            if let Err(e) = spawn_healthy(tier, plan, exe, file.path(), &gateway_url, &mut procs).await {
                terminate(&mut procs).await;
                return Err(e);
            }
        }
        Ok(Deployment {
            mode: plan.mode,
            gateway_url,
            registry: reach(&plan.registry, fixed_port(&plan.registry)),
            tiers: Tiers::Processes { procs, _plan: file },
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Base URL of the gateway, e.g. `http://127.0.0.1:8080`.
    pub fn gateway_url(&self) -> &str {
        &self.gateway_url
    }

    pub fn registry(&self) -> &str {
        &self.registry
    }

    /// Child process ids, empty for an in-process deployment.
    pub fn pids(&self) -> Vec<u32> {
        match &self.tiers {
            Tiers::InProcess { .. } => Vec::new(),
            Tiers::Processes { procs, .. } => procs.iter().filter_map(|p| p.child.id()).collect(),
        }
    }

    /// Resolves when a tier process exits on its own. Never resolves for an
    /// in-process deployment.
    pub async fn exited(&mut self) -> DeployError {
        match &mut self.tiers {
            Tiers::InProcess { .. } => std::future::pending().await,
            Tiers::Processes { procs, .. } => loop {
                for p in procs.iter_mut() {
                    if let Ok(Some(status)) = p.child.try_wait() {
                        return DeployError::TierExited { tier: p.tier, status: status.to_string() };
                    }
                }
                tokio::time::sleep(Duration::from_millis(200)).await;
            },
        }
    }

    /// Stops the tiers in reverse start order.
    pub async fn stop(self) -> Result<(), DeployError> {
        match self.tiers {
            Tiers::InProcess { registry, app, gateway } => {
                gateway.stop().await;
                let closed = app.stop().await;
                registry.stop().await;
                closed?;
            }
            Tiers::Processes { mut procs, .. } => terminate(&mut procs).await,
        }
        Ok(())
    }
}

async fn serve_registry(listen: &str) -> Result<ServerHandle, ServeError> {
    Server::new(contract::doc()).naming(Arc::new(Registry::new()))?.serve(listen).await
}

async fn spawn_healthy(
    tier: Tier,
    plan: &Plan,
    exe: &Path,
    plan_file: &Path,
    gateway_url: &str,
    procs: &mut Vec<Proc>,
) -> Result<(), DeployError> {
    let mut cmd = Command::new(exe);
    cmd.arg("tier").arg(tier.to_string()).arg("--plan").arg(plan_file);
    cmd.stdin(Stdio::null()).stdout(Stdio::null()).stderr(Stdio::inherit()).kill_on_drop(true);
    // SAFETY: prctl is async-signal-safe and touches no parent state.
    unsafe {
        cmd.pre_exec(|| {
            if libc::prctl(libc::PR_SET_PDEATHSIG, libc::SIGTERM) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            Ok(())
        });
    }
    let child = cmd.spawn().map_err(|source| DeployError::Spawn { tier, source })?;
    info!("{tier} started as pid {}", child.id().unwrap_or(0));
    procs.push(Proc { tier, child });
    let deadline = Instant::now() + HEALTH_TIMEOUT;
    loop {
        let proc = procs.last_mut().expect("just pushed");
        if let Ok(Some(status)) = proc.child.try_wait() {
            return Err(DeployError::TierExited { tier, status: status.to_string() });
        }
        if tier_healthy(tier, plan, gateway_url).await {
            return Ok(());
        }
        if Instant::now() > deadline {
            return Err(DeployError::HealthTimeout { tier, secs: HEALTH_TIMEOUT.as_secs() });
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
}

async fn terminate(procs: &mut Vec<Proc>) {
    while let Some(mut p) = procs.pop() {
        if let Some(pid) = p.child.id() {
            // SAFETY: plain syscall on a pid we own and have not reaped.
            unsafe {
                libc::kill(pid as libc::pid_t, libc::SIGTERM);
            }
        }
        match tokio::time::timeout(STOP_GRACE, p.child.wait()).await {
            Ok(Ok(status)) if !status.success() => warn!("{} exited with {status}", p.tier),
            Ok(_) => {}
            Err(_) => {
                warn!("{} ignored SIGTERM; killing", p.tier);
                let _ = p.child.kill().await;
            }
        }
    }
}

/// Waits for SIGTERM or ctrl-c.
pub async fn shutdown_signal() {
    let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).expect("SIGTERM handler");
    tokio::select! {
        _ = term.recv() => {}
        _ = tokio::signal::ctrl_c() => {}
    }
}

/// Runs one tier of `plan` in this process until SIGTERM or ctrl-c.
pub async fn run_tier(tier: Tier, plan: &Plan) -> Result<(), DeployError> {
    match tier {
        Tier::Registry => {
            let h = serve_registry(&plan.registry).await?;
            shutdown_signal().await;
            h.stop().await;
        }
        Tier::App => {
            let app = AppServer::start(&plan.app).await?;
            shutdown_signal().await;
            app.stop().await?;
        }
        Tier::Gateway => {
            let g = cis_gateway::start(&plan.gateway).await?;
            shutdown_signal().await;
            g.stop().await;
        }
    }
    info!("{tier} stopped");
    Ok(())
}

//! Deployment plans.
//!
//! A plan uses the server config format with one section per tier:
//!
//! ```text
//! mode = distributed
//!
//! [registry]
//! listen = 127.0.0.1:7100
//!
//! [app]
//! listen = 127.0.0.1:7101
//! db_dir = data
//! admin_password = change-me
//!
//! [gateway]
//! listen = 127.0.0.1:8080
//! assets = portal/dist
//! ```
//!
//! `[app]` takes every application server key and `[gateway]` every gateway
//! key. Both default their `registry` to the registry's `listen`. Relative
//! paths are resolved against the plan file's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cis_appserver::config::{parse_sections, ConfigError};
use cis_appserver::Config;
use cis_gateway::{GatewayConfig, GatewayConfigError};
use cis_middleware::split_endpoint;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Nondistributed,
    Distributed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nondistributed => "nondistributed",
            Mode::Distributed => "distributed",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "nondistributed" => Ok(Mode::Nondistributed),
            "distributed" => Ok(Mode::Distributed),
            other => Err(format!("mode `{other}` is neither nondistributed nor distributed")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Syntax(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("port {port} is used by both {first} and {second}")]
    PortCollision { port: u16, first: &'static str, second: &'static str },
    #[error("{tier} cannot listen on {addr}: {reason}")]
    PortInUse { tier: &'static str, addr: String, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub mode: Mode,
    pub registry: String,
    pub app: Config,
    pub gateway: GatewayConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Plan {
    /// A plan with every tier on an ephemeral local port.
    pub fn local(mode: Mode, db_dir: &Path) -> Plan {
        let app = Config {
            listen: "127.0.0.1:0".into(),
            registry: "127.0.0.1:0".into(),
            db_dir: Some(db_dir.to_path_buf()),
            ..Config::default()
        };
        let gateway = GatewayConfig { listen: "127.0.0.1:0".into(), registry: "127.0.0.1:0".into(), ..GatewayConfig::default() };
        Plan { mode, registry: "127.0.0.1:0".into(), app, gateway }
    }

    pub fn parse(text: &str, base: &Path) -> Result<Plan, PlanError> {
        let mut mode = None;
        let mut registry = None;
        let mut app_map = BTreeMap::new();
        let mut gw_map = BTreeMap::new();
        for (section, map) in parse_sections(text)? {
            match section.as_str() {
                "" => {
                    for (k, v) in map {
                        match k.as_str() {
                            "mode" => mode = Some(v.parse::<Mode>().map_err(PlanError::Invalid)?),
                            _ => return Err(PlanError::Invalid(format!("unknown plan key `{k}`"))),
                        }
                    }
                }
                "registry" => {
                    for (k, v) in map {
                        match k.as_str() {
                            "listen" => registry = Some(v),
                            _ => return Err(PlanError::Invalid(format!("unknown registry key `{k}`"))),
                        }
                    }
                }
                "app" => app_map = map,
                "gateway" => gw_map = map,
                other => return Err(PlanError::Invalid(format!("unknown section [{other}]"))),
            }
        }
        let registry = registry.unwrap_or_else(|| "127.0.0.1:7100".into());
        split_endpoint(&registry).map_err(PlanError::Invalid)?;
        app_map.entry("registry".into()).or_insert_with(|| registry.clone());
        gw_map.entry("registry".into()).or_insert_with(|| registry.clone());
        let mut app = Config::from_map(&app_map)?;
        let mut gateway = GatewayConfig::from_map(&gw_map)?;
        app.db_dir = app.db_dir.map(|d| resolve(base, &d));
        gateway.assets = gateway.assets.map(|d| resolve(base, &d));
        let plan = Plan { mode: mode.unwrap_or(Mode::Nondistributed), registry, app, gateway };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Plan, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|source| PlanError::Io { path: path.to_path_buf(), source })?;
        let abs = std::path::absolute(path).map_err(|source| PlanError::Io { path: path.to_path_buf(), source })?;
        let base = abs.parent().map(Path::to_path_buf).unwrap_or_default();
        Plan::parse(&text, &base)
    }

    fn listeners(&self) -> [(&'static str, &str); 3] {
        [("registry", &self.registry), ("app", &self.app.listen), ("gateway", &self.gateway.listen)]
    }

    /// Checks the plan without touching the network.
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.app.db_dir.is_none() {
            return Err(PlanError::Invalid("[app] needs db_dir".into()));
        }
        let mut seen: Vec<(&'static str, u16)> = Vec::new();
        for (tier, addr) in self.listeners() {
            let (_, port) = split_endpoint(addr).map_err(|e| PlanError::Invalid(format!("{tier}: {e}")))?;
            if port == 0 {
                if self.mode == Mode::Distributed {
                    return Err(PlanError::Invalid(format!("{tier}: distributed plans need fixed ports")));
                }
                continue;
            }
            if let Some((first, _)) = seen.iter().find(|(_, p)| *p == port) {
                return Err(PlanError::PortCollision { port, first, second: tier });
            }
            seen.push((tier, port));
        }
        if self.mode == Mode::Distributed && (self.app.registry != self.registry || self.gateway.registry != self.registry) {
            return Err(PlanError::Invalid("app and gateway must use the plan's registry".into()));
        }
        Ok(())
    }

    /// Fails with [`PlanError::PortInUse`] when any fixed port cannot be bound.
    pub fn check_ports(&self) -> Result<(), PlanError> {
        for (tier, addr) in self.listeners() {
            if split_endpoint(addr).map(|(_, p)| p == 0).unwrap_or(false) {
                continue;
            }
            TcpListener::bind(addr)
                .map_err(|e| PlanError::PortInUse { tier, addr: addr.to_string(), reason: e.to_string() })?;
        }
        Ok(())
    }

    /// The plan in its file format, with resolved paths.
    pub fn render(&self) -> String {
        let a = &self.app;
        let p = &a.policy;
        let mut out = format!("mode = {}\n\n[registry]\nlisten = {}\n\n[app]\n", self.mode, self.registry);
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("listen", a.listen.clone());
        kv("registry", a.registry.clone());
        if let Some(h) = &a.advertise_host {
            kv("advertise_host", h.clone());
        }
        if let Some(d) = &a.db_dir {
            kv("db_dir", d.display().to_string());
        }
        kv("term", p.current_term.clone());
        kv("fee_per_credit", p.fee_per_credit.to_string());
        kv("grades", p.grades.render());
        kv("decline_suffix", p.decline_suffix.clone());
        kv("default_capacity", p.default_capacity.to_string());
        kv("token_ttl_hours", a.token_ttl_hours.to_string());
        kv("admin_user", a.admin_user.clone());
        if let Some(pw) = &a.admin_password {
            kv("admin_password", pw.clone());
        }
        kv("hash_iterations", a.hash_iterations.to_string());
        kv("sync", a.sync.to_string());
        let g = &self.gateway;
        out.push_str(&format!("\n[gateway]\nlisten = {}\nregistry = {}\n", g.listen, g.registry));
        if let Some(d) = &g.assets {
            out.push_str(&format!("assets = {}\n", d.display()));
        }
        out.push_str(&format!("hr_url = {}\ntimeout_ms = {}\n", g.hr_url, g.timeout_ms));
        out
    }
}

/// A currently free local port.
pub fn free_port() -> std::io::Result<u16> {
    Ok(TcpListener::bind("127.0.0.1:0")?.local_addr()?.port())
}

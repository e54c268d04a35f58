#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cis_ops::api::Api;
use cis_ops::plan::{free_port, Mode, Plan};

pub const ADMIN_PW: &str = "admin-pw";
pub const GOLDEN: &str = include_str!("../golden/smoke.txt");

pub fn exe() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_fnucis"))
}

/// A plan on loopback with a store under `dir`. Distributed plans get fixed
/// free ports, nondistributed ones ephemeral ports.
pub fn plan(dir: &Path, mode: Mode) -> Plan {
    let mut p = Plan::local(mode, &dir.join("db"));
    p.app.admin_password = Some(ADMIN_PW.into());
    p.app.hash_iterations = 10;
    p.app.sync = false;
    if mode == Mode::Distributed {
        let port = || format!("127.0.0.1:{}", free_port().unwrap());
        p.registry = port();
        p.app.listen = port();
        p.gateway.listen = port();
        p.app.registry = p.registry.clone();
        p.gateway.registry = p.registry.clone();
    }
    p
}

pub async fn admin(api: &Api) -> String {
    api.login("admin", ADMIN_PW).await.unwrap()
}

pub fn transcript(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// True while a process with this pid exists and is not a zombie.
pub fn alive(pid: u32) -> bool {
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        Ok(stat) => !stat.rsplit(')').next().unwrap_or("").trim_start().starts_with('Z'),
        Err(_) => false,
    }
}

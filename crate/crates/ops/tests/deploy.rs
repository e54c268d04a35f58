mod common;

use std::net::TcpListener;

use cis_ops::api::Api;
use cis_ops::deploy::{DeployError, Deployment};
use cis_ops::plan::{Mode, PlanError};
use cis_store::{Store, StoreError};
use common::*;

#[tokio::test(flavor = "multi_thread")]
async fn nondistributed_runs_in_this_process() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), Mode::Nondistributed);
    let d = Deployment::start(&p, &exe()).await.unwrap();
    assert!(d.pids().is_empty());
    assert!(Api::new(d.gateway_url()).healthy().await);
    assert!(matches!(Store::open(dir.path().join("db")), Err(StoreError::Locked(_))));
    d.stop().await.unwrap();
    Store::open(dir.path().join("db")).unwrap().close().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn distributed_runs_three_processes_and_leaves_none() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), Mode::Distributed);
    let d = Deployment::start(&p, &exe()).await.unwrap();
    let pids = d.pids();
    assert_eq!(pids.len(), 3);
    assert!(pids.iter().all(|&pid| alive(pid) && pid != std::process::id()));
    let api = Api::new(d.gateway_url());
    assert_eq!(api.send("GET", "/api/config", None, None).await.unwrap().status, 200);
    admin(&api).await;
    d.stop().await.unwrap();
    assert!(pids.iter().all(|&pid| !alive(pid)), "orphan tier processes");
    Store::open(dir.path().join("db")).unwrap().close().unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn colliding_ports_fail_before_any_tier_starts() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(dir.path(), Mode::Distributed);
    p.gateway.listen = p.app.listen.clone();
    let e = Deployment::start(&p, &exe()).await.err().unwrap();
    assert!(matches!(e, DeployError::Plan(PlanError::PortCollision { second: "gateway", .. })), "{e}");
    TcpListener::bind(&p.registry).expect("registry never started");
    assert!(!dir.path().join("db").exists());
}

#[tokio::test(flavor = "multi_thread")]
async fn busy_port_fails_before_any_tier_starts() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [Mode::Nondistributed, Mode::Distributed] {
        let held = TcpListener::bind("127.0.0.1:0").unwrap();
        let mut p = plan(dir.path(), mode);
        p.gateway.listen = held.local_addr().unwrap().to_string();
        let e = Deployment::start(&p, &exe()).await.err().unwrap();
        assert!(matches!(e, DeployError::Plan(PlanError::PortInUse { tier: "gateway", .. })), "{e}");
        assert!(!dir.path().join("db").exists());
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn failing_tier_tears_down_the_started_ones() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(dir.path(), Mode::Distributed);
    std::fs::create_dir_all(dir.path().join("db")).unwrap();
    let _held = Store::open(dir.path().join("db")).unwrap();
    p.app.db_dir = Some(dir.path().join("db"));
    let e = Deployment::start(&p, &exe()).await.err().unwrap();
    assert!(matches!(e, DeployError::TierExited { tier: cis_ops::deploy::Tier::App, .. }), "{e}");
    TcpListener::bind(&p.registry).expect("registry was stopped");
}

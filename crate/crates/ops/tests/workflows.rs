mod common;

use std::collections::BTreeMap;

use cis_ops::api::Api;
use cis_ops::bench::{self, BenchOptions, Mix};
use cis_ops::deploy::Deployment;
use cis_ops::plan::Mode;
use cis_ops::seed::{seed, SeedError};
use cis_ops::smoke::{smoke, SmokeError, DEMO_FIXTURE};
use common::*;

async fn deployment(dir: &std::path::Path) -> Deployment {
    Deployment::start(&plan(dir, Mode::Nondistributed), &exe()).await.unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn seed_counts_then_skips_everything() {
    let dir = tempfile::tempdir().unwrap();
    let d = deployment(dir.path()).await;
    let api = Api::new(d.gateway_url());
    let token = admin(&api).await;
    let first = seed(&api, &token, DEMO_FIXTURE, false).await.unwrap();
    let want: BTreeMap<&str, usize> = [("program", 3), ("staff", 2), ("student", 5), ("unit", 8)].into();
    assert_eq!(first.created, want);
    assert!(first.skipped.is_empty());
    assert_eq!(first.to_string(), "unit\tcreated 8\tskipped 0\nprogram\tcreated 3\tskipped 0\nstaff\tcreated 2\tskipped 0\nstudent\tcreated 5\tskipped 0\n");
    let again = seed(&api, &token, DEMO_FIXTURE, false).await.unwrap();
    assert!(again.created.is_empty());
    assert_eq!(again.skipped, want);
    api.login("S1003", "s1003-pw").await.unwrap();
    api.login("HOD1", "hod-pw").await.unwrap();
    d.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn seed_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = deployment(dir.path()).await;
    let api = Api::new(d.gateway_url());
    let token = admin(&api).await;
    let fixture = "# two lines\nunit\tZZ101\tZed\t10\t-\n\nstudent\tS9001\tNo One\tNOPE\t-\tpw\n";
    match seed(&api, &token, fixture, false).await {
        Err(SeedError::Rejected { line: 4, kind: "student", code, .. }) => assert_eq!(code, "unknown-program"),
        other => panic!("{other:?}"),
    }
    match seed(&api, &token, "unit\tZZ102\tZed\tten\t-\n", false).await {
        Err(SeedError::Fixture(e)) => assert_eq!(e.line, 1),
        other => panic!("{other:?}"),
    }
    let students = api.send("GET", "/api/students/S9001", Some(&token), None).await.unwrap();
    assert_eq!(students.code(), Some("unknown-person"));
    let student = api.login("S1001", "x").await;
    assert!(student.is_err());
    d.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn smoke_matches_golden_on_fresh_store() {
    let dir = tempfile::tempdir().unwrap();
    let d = deployment(dir.path()).await;
    let lines = smoke(&Api::new(d.gateway_url()), "admin", ADMIN_PW).await.unwrap();
    d.stop().await.unwrap();
    assert_eq!(transcript(&lines), GOLDEN);
}

#[tokio::test(flavor = "multi_thread")]
async fn smoke_on_partly_seeded_store_fails_at_the_seed_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = deployment(dir.path()).await;
    let api = Api::new(d.gateway_url());
    let token = admin(&api).await;
    let partial: String = DEMO_FIXTURE.lines().filter(|l| l.starts_with("unit\tMA")).map(|l| format!("{l}\n")).collect();
    seed(&api, &token, &partial, false).await.unwrap();
    let e = smoke(&api, "admin", ADMIN_PW).await.unwrap_err();
    match &e {
        SmokeError::StepFailed { step, status: 409, body, .. } => {
            assert!(step.starts_with("04 seed demo fixture"), "{step}");
            assert!(step.contains("unit MA111"), "{step}");
            assert_eq!(body["error"], "duplicate-record");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(e.step().map(|s| &s[..2]), Some("04"));
    d.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn read_bench_succeeds_fully_and_repeatably() {
    let dir = tempfile::tempdir().unwrap();
    let d = deployment(dir.path()).await;
    let api = Api::new(d.gateway_url());
    seed(&api, &admin(&api).await, DEMO_FIXTURE, false).await.unwrap();
    let opts = BenchOptions { requests: 1000, concurrency: 1, mix: Mix::Read, seed: 3 };
    let a = bench::run(&api, "nondistributed", opts).await.unwrap();
    let b = bench::run(&api, "nondistributed", opts).await.unwrap();
    assert_eq!((a.succeeded, a.rejected, a.failed), (1000, 0, 0));
    assert_eq!((b.succeeded, b.rejected, b.failed), (a.succeeded, a.rejected, a.failed));
    assert!(a.p50 <= a.p95 && a.p95 <= a.p99);
    d.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn bench_needs_a_healthy_target() {
    let port = cis_ops::plan::free_port().unwrap();
    let api = Api::new(format!("http://127.0.0.1:{port}"));
    let opts = BenchOptions { requests: 1, concurrency: 1, mix: Mix::Read, seed: 0 };
    assert!(matches!(bench::run(&api, "x", opts).await, Err(bench::BenchError::TargetUnhealthy(_))));
}

#[tokio::test(flavor = "multi_thread")]
async fn write_bench_keeps_the_store_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), Mode::Nondistributed);
    let s = cis_ops::bench_plan(&p, &exe(), BenchOptions { requests: 400, concurrency: 16, mix: Mix::Write, seed: 9 })
        .await
        .unwrap();
    assert_eq!(s.failed, 0);
    assert_eq!(s.succeeded + s.rejected, 400);
    assert!(s.succeeded > 0 && s.rejected > 0);
    assert_eq!(s.audit_violations, Some(0));
}

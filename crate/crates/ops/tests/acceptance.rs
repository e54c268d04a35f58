//! Acceptance gate: runs each criterion within its time limit and prints one
//! PASS or FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::io::{Cursor, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cis_domain::contract::{self, parse_matrix, CAPABILITY_MATRIX};
use cis_domain::Role;
use cis_gateway::routes::ROUTES;
use cis_middleware::testkit::{fixture_doc, kind_samples, random_message, random_value};
use cis_middleware::{decode_exact, encode_value, frame, unframe, Client, IdlType, MessageKind, ObjectRef, Value, WireMessage};
use cis_ops::api::Api;
use cis_ops::bench::{self, BenchOptions, Mix};
use cis_ops::deploy::Deployment;
use cis_ops::plan::Mode;
use cis_ops::seed::seed;
use cis_ops::smoke::{smoke, DEMO_FIXTURE};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

fn codec_wire() {
    let doc = fixture_doc();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for t in kind_samples() {
        for i in 0..1000 {
            let v = random_value(&mut rng, &t, &doc, 3);
            let bytes = encode_value(&v, &t, &doc).unwrap();
            let back = decode_exact(&bytes, &t, &doc).unwrap_or_else(|e| panic!("{t:?} #{i}: {e}"));
            assert_eq!(back, v, "{t:?} #{i}");
            assert_eq!(encode_value(&back, &t, &doc).unwrap(), bytes, "{t:?} #{i} re-encode");
        }
    }
    for i in 0..1000 {
        let m = random_message(&mut rng, 4096);
        let bytes = frame(&m);
        let mut cur = Cursor::new(&bytes[..]);
        assert_eq!(unframe(&mut cur, usize::MAX).unwrap().as_ref(), Some(&m), "frame #{i}");
        assert_eq!(cur.position() as usize, bytes.len(), "frame #{i} leftover");
    }
    assert_eq!(encode_value(&Value::I32(7), &IdlType::I32, &doc).unwrap(), [0x07, 0, 0, 0]);
    assert_eq!(encode_value(&Value::str("ab"), &IdlType::String, &doc).unwrap(), [0x02, 0, 0, 0, 0x61, 0x62]);
    assert_eq!(
        frame(&WireMessage::new(MessageKind::Ping, 1, Vec::new())),
        [0x46, 0x43, 0x49, 0x53, 0x01, 0x03, 0x01, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
    );
}

/// Capability options the transcript exercises, found by matching each
/// request line against the route table.
fn options_covered(transcript: &str) -> BTreeSet<String> {
    let rows = parse_matrix(CAPABILITY_MATRIX).unwrap();
    let mut out = BTreeSet::new();
    for line in transcript.lines() {
        let request = line.split(" | ").nth(1).unwrap();
        let (method, target) = request.split_once(' ').unwrap();
        if target == "catalog" {
            out.insert("catalog maintenance".to_string());
            continue;
        }
        let path = target.split('?').next().unwrap();
        let segs: Vec<&str> = path.split('/').collect();
        let route = ROUTES.iter().find(|r| {
            let t: Vec<&str> = r.path.split('/').collect();
            r.method == method && t.len() == segs.len() && t.iter().zip(&segs).all(|(a, b)| a.starts_with('{') || a == b)
        });
        if let Some(r) = route {
            let op = r.capability();
            out.insert(rows.iter().find(|row| row.operation == op).unwrap().option.clone());
        }
    }
    out
}

async fn fresh_smoke(mode: Mode) -> String {
    let dir = tempfile::tempdir().unwrap();
    let d = Deployment::start(&plan(dir.path(), mode), &exe()).await.unwrap();
    let lines = smoke(&Api::new(d.gateway_url()), "admin", ADMIN_PW).await;
    d.stop().await.unwrap();
    transcript(&lines.unwrap())
}

fn golden_scenario() {
    let got = runtime().block_on(fresh_smoke(Mode::Nondistributed));
    assert!(got == GOLDEN, "transcript differs from golden:\n{got}");
    let all: BTreeSet<String> = parse_matrix(CAPABILITY_MATRIX).unwrap().into_iter().map(|r| r.option).collect();
    let covered = options_covered(&got);
    let missing: Vec<&String> = all.difference(&covered).collect();
    assert!(missing.is_empty(), "options never exercised: {missing:?}");
    for step in [
        "application to study", "approve application", "activate CS111", "enroll without prerequisite",
        "staff override enrollment", "submit coursework", "coursework weight overflow", "grades CS111",
        "history with GPA", "timetable", "approve ineligible graduation", "approve graduation",
        "approve program change", "invoices", "partial payment", "overpayment", "report enrollment_counts",
        "report pass_rates", "report application_funnel",
    ] {
        assert!(got.lines().any(|l| l[3..].starts_with(&format!("{step} |"))), "no step {step}");
    }
}

fn mode_transparency() {
    let rt = runtime();
    let local = rt.block_on(fresh_smoke(Mode::Nondistributed));
    let distributed = rt.block_on(fresh_smoke(Mode::Distributed));
    assert!(local == distributed, "modes differ:\n{local}\n---\n{distributed}");
    assert!(distributed == GOLDEN, "distributed transcript differs from golden");
}

fn crash_safety() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let sweep = cis_store::testkit::truncation_sweep(&mut rng, 50, &dir.path().join("sweep")).unwrap();
    assert_eq!(sweep.offsets_checked, sweep.log_len + 1);
    assert!(sweep.failures.is_empty(), "{:?}", sweep.failures);
    let oracle = cis_store::testkit::oracle_run(&mut rng, 10_000, &dir.path().join("oracle")).unwrap();
    assert_eq!(oracle.ops, 10_000);
    assert!(oracle.mismatches.is_empty(), "{:?}", oracle.mismatches);
}

const OPEN: [&str; 3] = ["Auth.login", "Auth.system_info", "Admissions.submit_application"];

async fn matrix_sweep() {
    let rows = parse_matrix(CAPABILITY_MATRIX).unwrap();
    let doc = contract::doc();
    let declared: Vec<String> =
        doc.interfaces.iter().flat_map(|i| i.methods.iter().map(move |m| format!("{}.{}", i.name, m.name))).collect();
    let listed: Vec<String> = rows.iter().map(|r| r.operation.clone()).collect();
    assert_eq!(listed.iter().collect::<BTreeSet<_>>(), declared.iter().collect::<BTreeSet<_>>());
    assert_eq!(listed.len(), declared.len());

    let dir = tempfile::tempdir().unwrap();
    let d = Deployment::start(&plan(dir.path(), Mode::Nondistributed), &exe()).await.unwrap();
    let api = Api::new(d.gateway_url());
    let admin_token = admin(&api).await;
    seed(&api, &admin_token, DEMO_FIXTURE, false).await.unwrap();
    let mut accounts = Vec::new();
    for (i, role) in Role::ALL.iter().enumerate() {
        let id = format!("R{i}");
        let person = json!({"postal_address": "", "residential_address": "", "home_phone": "", "mobile_phone": ""});
        let (path, body) = if *role == Role::Student {
            let s = json!({"id": id, "name": "R", "contact": person, "program": "BSCS", "major": null, "status": "admitted"});
            ("/api/students", json!({"student": s, "password": "pw"}))
        } else {
            let s = json!({"id": id, "name": "R", "contact": person, "role": role.as_str(), "teaching_assignments": []});
            ("/api/staff", json!({"staff": s, "password": "pw"}))
        };
        api.expect("POST", path, Some(&admin_token), Some(&body)).await.unwrap();
        accounts.push((*role, id.clone(), api.login(&id, "pw").await.unwrap()));
    }

    let client = Client::new(doc.clone());
    let registry = ObjectRef::naming_at(d.registry()).unwrap();
    let mut refs = std::collections::HashMap::new();
    for (name, _) in cis_appserver::SERVANTS.iter() {
        refs.insert(*name, client.resolve(&registry, name).await.unwrap());
    }
    let object_of = |iface: &str| cis_appserver::SERVANTS.iter().find(|(_, i)| *i == iface).unwrap().0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = Vec::new();
    for (col, (role, id, token)) in accounts.iter().enumerate() {
        let mut token = token.clone();
        for row in &rows {
            let r = client.invoke(&refs["auth"], "authorize", vec![Value::str(&token), Value::str(&row.operation)]).await;
            let allowed = match r {
                Ok(_) => true,
                Err(e) if e.code() == Some("forbidden") => false,
                Err(e) => panic!("{role} authorize {}: {e}", row.operation),
            };
            if allowed != row.allowed[col] {
                mismatches.push(format!("authorize {role} {}", row.operation));
            }
            if OPEN.contains(&row.operation.as_str()) || row.operation == "Auth.authorize" {
                continue;
            }
            let (iface, method) = row.operation.split_once('.').unwrap();
            let sig = doc.method(iface, method).unwrap();
            for _ in 0..2 {
                let mut args: Vec<Value> = sig.params.iter().map(|p| random_value(&mut rng, &p.ty, &doc, 2)).collect();
                args[0] = Value::str(&token);
                let r = client.invoke(&refs[object_of(iface)], method, args).await;
                let denied = matches!(&r, Err(e) if e.code() == Some("forbidden"));
                if denied == row.allowed[col] {
                    mismatches.push(format!("dispatch {role} {}: {r:?}", row.operation));
                }
                if row.operation == "Auth.logout" {
                    token = api.login(id, "pw").await.unwrap();
                }
            }
        }
    }
    d.stop().await.unwrap();
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

async fn race_suite() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), Mode::Nondistributed);
    let d = Deployment::start(&p, &exe()).await.unwrap();
    let api = Api::new(d.gateway_url());
    seed(&api, &admin(&api).await, DEMO_FIXTURE, false).await.unwrap();
    let hod = api.login("HOD1", "hod-pw").await.unwrap();
    let mut students = Vec::new();
    for (id, pw) in bench::STUDENTS {
        students.push((id, api.login(id, pw).await.unwrap()));
    }
    for trial in 0..100 {
        let campus = format!("Race{trial}");
        let key = json!({"unit": "CS111", "campus": campus, "term": "2024-S1"});
        let req = json!({"unit": "CS111", "campus": campus, "term": "2024-S1", "capacity": 1, "teacher": null, "timetable": []});
        api.expect("POST", "/api/offerings", Some(&hod), Some(&req)).await.unwrap();
        let tasks: Vec<_> = students
            .iter()
            .map(|(id, token)| {
                let (api, id, token, key) = (api.clone(), id.to_string(), token.clone(), key.clone());
                tokio::spawn(async move {
                    let r = api.send("POST", "/api/enrollments", Some(&token), Some(&json!({"student": id, "offering": key}))).await;
                    (id, token, r.unwrap())
                })
            })
            .collect();
        let mut winners = Vec::new();
        for t in tasks {
            let (id, token, r) = t.await.unwrap();
            match r.status {
                200 => winners.push((id, token)),
                _ => assert_eq!(r.code(), Some("capacity-full"), "trial {trial} {id}: {:?}", r.body),
            }
        }
        assert_eq!(winners.len(), 1, "trial {trial}");
        let list = api.expect("GET", &format!("/api/offerings/CS111:{campus}:2024-S1/classlist"), Some(&hod), None).await.unwrap();
        assert_eq!(list.as_array().unwrap().len(), 1, "trial {trial}");
        let (id, token) = &winners[0];
        let invoices = api.expect("GET", "/api/invoices", Some(token), None).await.unwrap();
        assert_eq!(invoices[0]["total"], 600, "trial {trial}: {invoices}");
        api.expect("DELETE", "/api/enrollments", Some(token), Some(&json!({"student": id, "offering": key}))).await.unwrap();
    }
    for (_, token) in &students {
        for inv in api.expect("GET", "/api/invoices", Some(token), None).await.unwrap().as_array().unwrap() {
            assert_eq!(inv["total"], 0, "{inv}");
        }
    }
    let s = bench::run(&api, "nondistributed", BenchOptions { requests: 1000, concurrency: 16, mix: Mix::Mixed, seed: 16 })
        .await
        .unwrap();
    assert_eq!(s.failed, 0);
    assert_eq!(s.succeeded + s.rejected, 1000);
    d.stop().await.unwrap();
    let violations = cis_ops::audit_store(p.app.db_dir.as_deref().unwrap(), &p.app.policy).unwrap();
    assert!(violations.is_empty(), "{violations:#?}");
}

fn oracle_equivalence() {
    let r = cis_domain::testkit::catalog_oracle(2024, 200);
    assert_eq!(r.catalogs, 200);
    assert!(r.students_checked >= 200);
    assert!(r.mismatches.is_empty(), "{:#?}", r.mismatches);
}

type Criterion = (&'static str, Option<Duration>, Box<dyn Fn()>);

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("codec and wire round-trips", Some(Duration::from_secs(10)), Box::new(codec_wire)),
        ("golden scenario", Some(Duration::from_secs(60)), Box::new(golden_scenario)),
        ("deployment transparency", Some(Duration::from_secs(120)), Box::new(mode_transparency)),
        ("crash safety", Some(Duration::from_secs(60)), Box::new(crash_safety)),
        ("authorization matrix", None, Box::new(|| runtime().block_on(matrix_sweep()))),
        ("race suite and post-bench audit", Some(Duration::from_secs(120)), Box::new(|| runtime().block_on(race_suite()))),
        ("oracle equivalence", None, Box::new(oracle_equivalence)),
    ];
    let mut failed = Vec::new();
    for (name, limit, run) in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run));
        let took = started.elapsed();
        let verdict = match (&outcome, limit) {
            (Err(_), _) => Some("assertion failed".to_string()),
            (Ok(()), Some(l)) if took > *l => Some(format!("over the {}s limit", l.as_secs())),
            _ => None,
        };
        let limit_text = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        let line = match verdict {
            None => format!("PASS {name}: {:.2}s{limit_text}\n", took.as_secs_f64()),
            Some(why) => {
                failed.push(*name);
                format!("FAIL {name}: {why} after {:.2}s{limit_text}\n", took.as_secs_f64())
            }
        };
        let _ = std::io::stdout().write_all(line.as_bytes());
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

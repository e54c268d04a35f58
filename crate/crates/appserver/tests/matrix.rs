mod common;

use std::sync::Arc;

use cis_appserver::{auth, Service};
use cis_domain::contract::{self, parse_matrix, CAPABILITY_MATRIX};
use cis_domain::Role;
use cis_middleware::testkit::random_value;
use cis_middleware::{Servant, Value};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Operations callable without a session.
const OPEN: [&str; 3] = ["Auth.login", "Auth.system_info", "Admissions.submit_application"];

fn accounts(f: &Fixture) -> Vec<(Role, String, String)> {
    let admin = f.seed();
    Role::ALL
        .iter()
        .enumerate()
        .map(|(i, &role)| {
            let id = format!("R{i}");
            if role == Role::Student {
                f.call("Directory.create_student", vec![s(&admin), v(student(&id, "BSC")), s("pw")]).unwrap();
            } else {
                f.call("Directory.create_staff", vec![s(&admin), v(staff(&id, role)), s("pw")]).unwrap();
            }
            (role, id.clone(), f.login(&id, "pw"))
        })
        .collect()
}

#[test]
fn matrix_fixture_matches_the_code_table() {
    let rows = parse_matrix(CAPABILITY_MATRIX).unwrap();
    let ops: Vec<&str> = rows.iter().map(|r| r.operation.as_str()).collect();
    assert_eq!(ops, auth::OPERATIONS);
    for row in &rows {
        for (role, &expect) in Role::ALL.iter().zip(&row.allowed) {
            assert_eq!(auth::allowed(*role, &row.operation), expect, "{role} {}", row.operation);
        }
    }
    for op in OPEN {
        assert!(rows.iter().find(|r| r.operation == op).unwrap().allowed.iter().all(|&a| a), "{op}");
    }
}

#[test]
fn authorize_sweep_equals_fixture() {
    let f = Fixture::new();
    let rows = parse_matrix(CAPABILITY_MATRIX).unwrap();
    for (i, (role, _, token)) in accounts(&f).into_iter().enumerate() {
        for row in &rows {
            let r = f.call("Auth.authorize", vec![s(&token), s(&row.operation)]);
            match (row.allowed[i], r) {
                (true, Ok(_)) => {}
                (false, Err(e)) if e.code() == "forbidden" => {}
                (want, got) => panic!("{role} {}: want allowed={want}, got {got:?}", row.operation),
            }
        }
    }
}

#[test]
fn dispatch_sweep_denies_exactly_the_fixture_cells() {
    let f = Fixture::new();
    let doc = contract::doc();
    let rows = parse_matrix(CAPABILITY_MATRIX).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (i, (role, id, mut token)) in accounts(&f).into_iter().enumerate() {
        // Auth.authorize denies based on its capability argument; swept above.
        for row in rows.iter().filter(|r| !OPEN.contains(&r.operation.as_str()) && r.operation != "Auth.authorize") {
            let (iface, method) = row.operation.split_once('.').unwrap();
            let sig = doc.method(iface, method).unwrap();
            assert_eq!(sig.params[0].name, "token", "{}", row.operation);
            for _ in 0..3 {
                let mut args: Vec<Value> = sig.params.iter().map(|p| random_value(&mut rng, &p.ty, &doc, 2)).collect();
                args[0] = s(&token);
                let servant = Service { app: Arc::clone(&f.app), interface: iface.to_string() };
                let denied = matches!(servant.dispatch(sig, args), Err(ref e) if e.code == "forbidden");
                assert_eq!(denied, !row.allowed[i], "{role} {}", row.operation);
                if row.operation == "Auth.logout" {
                    token = f.login(&id, "pw");
                }
            }
        }
    }
}

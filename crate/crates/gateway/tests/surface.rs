mod common;

use std::collections::BTreeSet;

use cis_domain::contract;
use cis_gateway::routes::path_params;
use cis_gateway::{ApiError, Body, ROUTES};
use cis_middleware::{codes, Value};
use axum::response::IntoResponse;
use common::*;

#[test]
fn every_operation_but_authorize_has_a_route() {
    let doc = contract::doc();
    let all: BTreeSet<String> = doc
        .interfaces
        .iter()
        .flat_map(|i| i.methods.iter().map(move |m| format!("{}.{}", i.name, m.name)))
        .collect();
    let mut routed: BTreeSet<String> = ROUTES.iter().map(|r| r.capability()).collect();
    routed.insert("Auth.authorize".into());
    assert_eq!(routed, all);
}

#[test]
fn routes_are_well_formed() {
    let doc = contract::doc();
    let mut keys = BTreeSet::new();
    for r in ROUTES {
        assert!(keys.insert((r.method, r.path)), "{} {} twice", r.method, r.path);
        let sig = doc.method(r.interface, r.operation).unwrap_or_else(|| panic!("{}", r.capability()));
        let names: Vec<&str> = sig.params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names.contains(&"token"), !r.public, "{}", r.capability());
        for p in path_params(r.path) {
            assert!(names.contains(&p), "{} {}: no parameter {p}", r.method, r.path);
        }
        if let Body::Whole(p) = r.body {
            assert!(names.contains(&p), "{}: no parameter {p}", r.capability());
        }
        if r.method == "GET" {
            assert_eq!(r.body, Body::None, "{}", r.path);
        }
        let servant = SERVICES.iter().find(|(n, _)| *n == r.service).map(|(_, i)| *i);
        assert_eq!(servant, Some(r.interface), "{}", r.capability());
    }
}

#[tokio::test]
async fn error_table_maps_every_code_once() {
    let table = contract::error_table();
    let unique: BTreeSet<&str> = table.iter().map(|e| e.code.as_str()).collect();
    assert_eq!(unique.len(), table.len());
    for e in table {
        let resp = ApiError::new(e.code.clone(), "d").into_response();
        assert_eq!(resp.status().as_u16(), e.status, "{}", e.code);
    }
    for c in [codes::NO_SUCH_OBJECT, codes::NO_SUCH_METHOD, codes::BAD_REQUEST, codes::NOT_BOUND, codes::NO_NAMING, codes::INTERNAL] {
        assert!(contract::error_entry(c).is_some(), "{c}");
    }
    for c in ["service-unavailable", "upstream-failed", "not-found"] {
        assert!(contract::error_entry(c).is_some(), "{c}");
    }
    let resp = ApiError::new("made-up", "x").into_response();
    assert_eq!(resp.status().as_u16(), 500);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unknown_paths_redirect_and_assets() {
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<h1>portal</h1>").unwrap();
    let reg = empty_registry().await;
    let g = gateway(reg.port(), Some(assets.path())).await;

    let r = http().get(url(&g, "/api/nothing/here")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 404);
    assert_eq!(r.json::<serde_json::Value>().await.unwrap()["error"], "not-found");

    let r = http().get(url(&g, "/api/hr")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 302);
    assert_eq!(r.headers()["location"], "https://hr.test/portal");

    let r = http().get(url(&g, "/index.html")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(r.text().await.unwrap(), "<h1>portal</h1>");
    let r = http().get(url(&g, "/")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(http().get(url(&g, "/missing.js")).send().await.unwrap().status().as_u16(), 404);

    assert_eq!(http().get(url(&g, "/api/health")).send().await.unwrap().status().as_u16(), 200);
    g.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn api_is_503_while_the_app_tier_is_absent() {
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "ok").unwrap();

    // Registry up, nothing bound.
    let reg = empty_registry().await;
    let g = gateway(reg.port(), Some(assets.path())).await;
    let r = http().get(url(&g, "/api/config")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 503);
    assert_eq!(r.json::<serde_json::Value>().await.unwrap()["error"], "service-unavailable");
    assert_eq!(http().get(url(&g, "/index.html")).send().await.unwrap().status().as_u16(), 200);
    g.stop().await;

    // Registry down as well.
    let port = reg.port();
    reg.stop().await;
    let g = gateway(port, Some(assets.path())).await;
    let r = http().post(url(&g, "/api/enrollments")).json(&serde_json::json!({})).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 400);
    let r = http().get(url(&g, "/api/units")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 503);
    assert_eq!(http().get(url(&g, "/index.html")).send().await.unwrap().status().as_u16(), 200);
    g.stop().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn app_tier_restart_is_followed_after_re_resolve() {
    let script = Script::new();
    let tier = scripted_tier(script.clone()).await;
    let g = gateway(tier.registry_server.port(), None).await;
    *script.reply.lock() = Ok(Value::record([("current_term", Value::str("2024-S1")), ("fee_per_credit", Value::I64(5))]));
    assert_eq!(http().get(url(&g, "/api/config")).send().await.unwrap().status().as_u16(), 200);

    tier.server.stop().await;
    let r = http().get(url(&g, "/api/config")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 502);
    assert_eq!(r.json::<serde_json::Value>().await.unwrap()["error"], "upstream-failed");

    let restarted = serve_scripted(script.clone()).await;
    bind_all(&tier.registry, restarted.port());
    let r = http().get(url(&g, "/api/config")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert_eq!(r.json::<serde_json::Value>().await.unwrap()["fee_per_credit"], 5);
    restarted.stop().await;
    g.stop().await;
}

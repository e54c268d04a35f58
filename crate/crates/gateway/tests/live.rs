mod common;

use cis_appserver::{AppServer, Config};
use common::*;
use serde_json::{json, Value as Json};

struct Live {
    _dir: tempfile::TempDir,
    registry: cis_middleware::ServerHandle,
    app: AppServer,
}

async fn live() -> Live {
    let registry = empty_registry().await;
    let dir = tempfile::tempdir().unwrap();
    let config = Config {
        listen: "127.0.0.1:0".into(),
        registry: format!("127.0.0.1:{}", registry.port()),
        db_dir: Some(dir.path().to_path_buf()),
        admin_user: "ADM1".into(),
        admin_password: Some("pw".into()),
        hash_iterations: 2,
        sync: false,
        ..Config::default()
    };
    let app = AppServer::start(&config).await.unwrap();
    Live { _dir: dir, registry, app }
}

async fn call(g: &cis_gateway::GatewayHandle, method: &str, path: &str, token: Option<&str>, body: Option<Json>) -> (u16, Json) {
    let mut b = http().request(method.parse().unwrap(), url(g, path));
    if let Some(t) = token {
        b = b.header("cookie", format!("theme=dark; fnucis_session={t}"));
    }
    if let Some(body) = body {
        b = b.json(&body);
    }
    let r = b.send().await.unwrap();
    (r.status().as_u16(), r.json().await.unwrap_or(Json::Null))
}

async fn login(g: &cis_gateway::GatewayHandle, user: &str) -> String {
    let r = http().post(url(g, "/api/login")).json(&json!({"username": user, "password": "pw"})).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let cookie = r.headers()["set-cookie"].to_str().unwrap().to_string();
    let body: Json = r.json().await.unwrap();
    let token = body["token"].as_str().unwrap().to_string();
    assert!(cookie.starts_with(&format!("fnucis_session={token};")), "{cookie}");
    token
}

fn ok(r: (u16, Json)) -> Json {
    assert_eq!(r.0, 200, "{}", r.1);
    r.1
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn end_to_end_through_the_real_app_tier() {
    let l = live().await;
    let g = gateway(l.registry.port(), None).await;

    let cfg = ok(call(&g, "GET", "/api/config", None, None).await);
    assert_eq!(cfg["current_term"], "2024-S1");

    let admin = login(&g, "ADM1").await;
    for (code, prereq) in [("CS101", json!([])), ("CS201", json!(["CS101"]))] {
        let unit = json!({"code": code, "title": code, "credit_points": 15, "prerequisites": prereq});
        ok(call(&g, "POST", "/api/units", Some(&admin), Some(unit)).await);
    }
    let program = json!({"id": "BSC", "title": "Science", "required_units": ["CS101", "CS201"], "majors": []});
    ok(call(&g, "POST", "/api/programs", Some(&admin), Some(program)).await);
    let contact = json!({"postal_address": "", "residential_address": "", "home_phone": "", "mobile_phone": ""});
    let hod = json!({"id": "HOD1", "name": "H", "contact": contact, "role": "head_of_department", "teaching_assignments": []});
    ok(call(&g, "POST", "/api/staff", Some(&admin), Some(json!({"staff": hod, "password": "pw"}))).await);
    let stu = json!({"id": "S1", "name": "S", "contact": contact, "program": "BSC", "major": null, "status": "admitted"});
    ok(call(&g, "POST", "/api/students", Some(&admin), Some(json!({"student": stu, "password": "pw"}))).await);

    let hod = login(&g, "HOD1").await;
    let req = json!({"unit": "CS201", "campus": "Samabula", "term": "2024-S1", "capacity": 5, "teacher": null, "timetable": []});
    ok(call(&g, "POST", "/api/offerings", Some(&hod), Some(req)).await);

    let enroll = json!({"student": "S1", "offering": {"unit": "CS201", "campus": "Samabula", "term": "2024-S1"}});
    let (status, body) = call(&g, "POST", "/api/enrollments", None, Some(enroll.clone())).await;
    assert_eq!((status, body["error"].as_str()), (401, Some("token-missing")));

    let student = login(&g, "S1").await;
    let (status, body) = call(&g, "POST", "/api/enrollments", Some(&student), Some(enroll.clone())).await;
    assert_eq!((status, body["error"].as_str()), (422, Some("prereq-unmet")), "{body}");
    assert!(body["detail"].as_str().unwrap().contains("CS101"));

    let (status, body) = call(&g, "GET", "/api/reports/pass_rates?term=2024-S1", Some(&student), None).await;
    assert_eq!((status, body["error"].as_str()), (403, Some("forbidden")));

    let history = ok(call(&g, "GET", "/api/students/S1/history", Some(&admin), None).await);
    assert_eq!(history["student"], "S1", "{history}");

    let offerings = ok(call(&g, "GET", "/api/offerings?term=2024-S1", Some(&student), None).await);
    assert_eq!(offerings.as_array().unwrap().len(), 1);

    // A fresh gateway process honours sessions issued through the old one.
    g.stop().await;
    let g = gateway(l.registry.port(), None).await;
    let who = ok(call(&g, "GET", "/api/session", Some(&student), None).await);
    assert_eq!(who["subject"], "S1");

    let r = http().post(url(&g, "/api/logout")).bearer_auth(&student).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 200);
    assert!(r.headers()["set-cookie"].to_str().unwrap().contains("Max-Age=0"));
    let (status, body) = call(&g, "GET", "/api/session", Some(&student), None).await;
    assert_eq!((status, body["error"].as_str()), (401, Some("token-unknown")));

    g.stop().await;
    l.app.stop().await.unwrap();
    l.registry.stop().await;
}

//! The end-to-end scenario, recorded as a normalized transcript.
//!
//! Each transcript line is `NN step | METHOD path | status | body`, where the
//! body is compact JSON with sorted keys. Session tokens become `<token>`,
//! `expires_at` and `timestamp` values become `<time>`, and identifiers the
//! server allocates are replaced by placeholders such as `<student-1>`.

use std::collections::HashMap;

use cis_domain::contract;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::api::{Api, ApiError};
use crate::seed::{seed, SeedError};

pub const DEMO_FIXTURE: &str = include_str!("../../../contract/demo_fixture.tsv");

#[derive(Debug, Error)]
pub enum SmokeError {
    #[error("step {step} expected {expected}, got {status}: {body}")]
    StepFailed { step: String, expected: String, status: u16, body: Json },
    #[error("step seed: {0}")]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Api(#[from] ApiError),
}

impl SmokeError {
    /// Name of the failing step, if a step failed.
    pub fn step(&self) -> Option<&str> {
        match self {
            SmokeError::StepFailed { step, .. } => Some(step),
            _ => None,
        }
    }
}

#[derive(Clone, Copy)]
enum Expect {
    Ok,
    Err(&'static str),
    Redirect,
}

impl Expect {
    fn describe(self) -> String {
        match self {
            Expect::Ok => "200".into(),
            Expect::Err(code) => format!("{} {code}", status_of(code)),
            Expect::Redirect => "302".into(),
        }
    }

    fn accepts(self, status: u16, body: &Json) -> bool {
        match self {
            Expect::Ok => status == 200,
            Expect::Err(code) => status == status_of(code) && body.get("error").and_then(Json::as_str) == Some(code),
            Expect::Redirect => status == 302,
        }
    }
}

fn status_of(code: &str) -> u16 {
    contract::error_entry(code).map_or(500, |e| e.status)
}

fn normalize(j: &mut Json, aliases: &[(String, String)]) {
    match j {
        Json::Object(map) => {
            for (k, v) in map.iter_mut() {
                match k.as_str() {
                    "token" if v.is_string() => *v = json!("<token>"),
                    "expires_at" | "timestamp" if v.is_number() => *v = json!("<time>"),
                    _ => normalize(v, aliases),
                }
            }
        }
        Json::Array(items) => items.iter_mut().for_each(|v| normalize(v, aliases)),
        Json::String(s) => *s = substitute(s, aliases),
        _ => {}
    }
}

fn substitute(s: &str, aliases: &[(String, String)]) -> String {
    let mut out = s.to_string();
    for (actual, placeholder) in aliases {
        out = out.replace(actual.as_str(), placeholder);
    }
    out
}

struct Entry {
    step: String,
    method: String,
    path: String,
    status: u16,
    body: Json,
}

struct Run<'a> {
    api: &'a Api,
    entries: Vec<Entry>,
    tokens: HashMap<&'static str, String>,
    aliases: Vec<(String, String)>,
}

impl Run<'_> {
    async fn step(
        &mut self,
        name: &str,
        who: Option<&str>,
        method: &str,
        path: &str,
        body: Option<Json>,
        expect: Expect,
    ) -> Result<Json, SmokeError> {
        let token = who.map(|w| self.tokens.get(w).cloned().unwrap_or_default());
        let reply = self.api.send(method, path, token.as_deref(), body.as_ref()).await?;
        let step = format!("{:02} {name}", self.entries.len() + 1);
        if !expect.accepts(reply.status, &reply.body) {
            return Err(SmokeError::StepFailed { step, expected: expect.describe(), status: reply.status, body: reply.body });
        }
        let shown = match expect {
            Expect::Redirect => json!({ "location": reply.location }),
            _ => reply.body.clone(),
        };
        self.entries.push(Entry { step, method: method.into(), path: path.into(), status: reply.status, body: shown });
        Ok(reply.body)
    }

    async fn login(&mut self, who: &'static str, user: &str, password: &str) -> Result<(), SmokeError> {
        let body = self
            .step(&format!("login {who}"), None, "POST", "/api/login", Some(json!({"username": user, "password": password})), Expect::Ok)
            .await?;
        self.tokens.insert(who, body["token"].as_str().unwrap_or_default().to_string());
        Ok(())
    }

    fn render(mut self) -> Vec<String> {
        self.entries
            .iter_mut()
            .map(|e| {
                normalize(&mut e.body, &self.aliases);
                format!("{} | {} {} | {} | {}", e.step, e.method, substitute(&e.path, &self.aliases), e.status, e.body)
            })
            .collect()
    }

    /// Registers a server-allocated id to be shown as a placeholder.
    fn alias(&mut self, actual: &Json, placeholder: &str) {
        if let Some(a) = actual.as_str() {
            self.aliases.push((a.to_string(), format!("<{placeholder}>")));
            self.aliases.sort_by_key(|a| std::cmp::Reverse(a.0.len()));
        }
    }
}

fn key(unit: &str) -> Json {
    json!({"unit": unit, "campus": "Laucala", "term": "2024-S1"})
}

fn activation(unit: &str, capacity: i32, room: &str, day: &str) -> Json {
    json!({
        "unit": unit, "campus": "Laucala", "term": "2024-S1", "capacity": capacity, "teacher": "LEC1",
        "timetable": [
            {"kind": "class", "day": day, "start": "09:00", "end": "11:00", "room": room},
            {"kind": "final_exam", "day": "fri", "start": "13:00", "end": "16:00", "room": "Gym"},
        ],
    })
}

/// Runs the scenario against a gateway whose store holds only the bootstrap
/// account. Returns the transcript, one line per step.
pub async fn smoke(api: &Api, admin_user: &str, admin_password: &str) -> Result<Vec<String>, SmokeError> {
    let mut r = Run { api, entries: Vec::new(), tokens: HashMap::new(), aliases: Vec::new() };
    let admin = Some("admin");
    let hod = Some("hod");
    let lec = Some("lecturer");
    let stu = Some("student");
    let other = Some("other");

    r.step("current term", None, "GET", "/api/config", None, Expect::Ok).await?;
    r.step("anonymous session", None, "GET", "/api/session", None, Expect::Err("token-missing")).await?;
    r.login("admin", admin_user, admin_password).await?;

    let seed_step = format!("{:02} seed demo fixture", r.entries.len() + 1);
    let report = match seed(api, &r.tokens["admin"], DEMO_FIXTURE, true).await {
        Ok(report) => report,
        Err(SeedError::Rejected { line, kind, id, status, code, detail }) => {
            return Err(SmokeError::StepFailed {
                step: format!("{seed_step} (fixture line {line}, {kind} {id})"),
                expected: "200".into(),
                status,
                body: json!({"error": code, "detail": detail}),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let counts: serde_json::Map<String, Json> = report.created.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    r.entries.push(Entry {
        step: seed_step,
        method: "POST".into(),
        path: "catalog".into(),
        status: 200,
        body: Json::Object(counts),
    });

    r.step("list units", admin, "GET", "/api/units", None, Expect::Ok).await?;
    let contact = json!({"postal_address": "PO Box 7, Suva", "residential_address": "Samabula", "home_phone": "3300007", "mobile_phone": "7100007"});
    let form = json!({"name": "Ada Lovelace", "contact": contact, "program": "BSCS", "password": "ada-pw"});
    r.step("application for unknown program", None, "POST", "/api/applications",
        Some(json!({"name": "Ada Lovelace", "contact": contact, "program": "BXYZ", "password": "ada-pw"})),
        Expect::Err("unknown-program")).await?;
    let app = r.step("application to study", None, "POST", "/api/applications", Some(form), Expect::Ok).await?;
    r.alias(&app["id"], "application-1");
    let app_id = app["id"].as_str().unwrap_or_default().to_string();
    r.step("pending applications", admin, "GET", "/api/applications?status=pending", None, Expect::Ok).await?;
    r.step("application detail", admin, "GET", &format!("/api/applications/{app_id}"), None, Expect::Ok).await?;
    r.step("applicant cannot sign in yet", None, "POST", "/api/login",
        Some(json!({"username": app_id, "password": "ada-pw"})), Expect::Err("account-inactive")).await?;
    let decided = r.step("approve application", admin, "POST", &format!("/api/applications/{app_id}/decision"),
        Some(json!({"decision": "approve"})), Expect::Ok).await?;
    r.alias(&decided["student_id"], "student-1");
    let sid = decided["student_id"].as_str().unwrap_or_default().to_string();
    r.step("application decided twice", admin, "POST", &format!("/api/applications/{app_id}/decision"),
        Some(json!({"decision": "reject"})), Expect::Err("already-decided")).await?;
    r.step("decision visible", admin, "GET", &format!("/api/applications/{app_id}/decision"), None, Expect::Ok).await?;
    r.login("student", &sid, "ada-pw").await?;
    r.step("student session", stu, "GET", "/api/session", None, Expect::Ok).await?;
    r.step("student profile", stu, "GET", &format!("/api/people/{sid}/profile"), None, Expect::Ok).await?;
    let moved = json!({"postal_address": "PO Box 7, Suva", "residential_address": "Laucala Bay", "home_phone": "3300007", "mobile_phone": "7100070"});
    r.step("update profile", stu, "PUT", &format!("/api/people/{sid}/profile"), Some(moved), Expect::Ok).await?;
    r.step("other student's profile", stu, "GET", "/api/people/S1001/profile", None, Expect::Err("not-authorized")).await?;
    r.step("program details", stu, "GET", "/api/programs", None, Expect::Ok).await?;
    r.step("program requirements", stu, "GET", &format!("/api/students/{sid}/requirements"), None, Expect::Ok).await?;

    r.login("hod", "HOD1", "hod-pw").await?;
    r.login("lecturer", "LEC1", "lec-pw").await?;
    r.step("activation by lecturer", lec, "POST", "/api/offerings", Some(activation("CS111", 30, "S111", "mon")), Expect::Err("forbidden")).await?;
    for (unit, room, day) in [("CS111", "S111", "mon"), ("CS112", "S112", "tue"), ("CS211", "S211", "wed"), ("MA111", "M111", "thu")] {
        r.step(&format!("activate {unit}"), hod, "POST", "/api/offerings", Some(activation(unit, 30, room, day)), Expect::Ok).await?;
    }
    r.step("activate CS111 again", hod, "POST", "/api/offerings", Some(activation("CS111", 30, "S111", "mon")), Expect::Err("duplicate-offering")).await?;
    r.step("offerings", stu, "GET", "/api/offerings?term=2024-S1", None, Expect::Ok).await?;
    r.step("enroll without prerequisite", stu, "POST", "/api/enrollments",
        Some(json!({"student": sid, "offering": key("CS112")})), Expect::Err("prereq-unmet")).await?;
    r.step("staff override enrollment", lec, "POST", "/api/enrollments",
        Some(json!({"student": sid, "offering": key("CS112")})), Expect::Ok).await?;
    r.step("enroll", stu, "POST", "/api/enrollments", Some(json!({"student": sid, "offering": key("CS111")})), Expect::Ok).await?;
    r.step("enroll twice", stu, "POST", "/api/enrollments",
        Some(json!({"student": sid, "offering": key("CS111")})), Expect::Err("duplicate-enrollment")).await?;
    r.step("admin cannot enroll", admin, "POST", "/api/enrollments",
        Some(json!({"student": "S1001", "offering": key("CS111")})), Expect::Err("forbidden")).await?;
    r.step("enrollments", stu, "GET", &format!("/api/students/{sid}/enrollments"), None, Expect::Ok).await?;
    r.step("timetable", stu, "GET", &format!("/api/students/{sid}/timetable?term=2024-S1"), None, Expect::Ok).await?;
    r.step("class list", lec, "GET", "/api/offerings/CS111:Laucala:2024-S1/classlist", None, Expect::Ok).await?;
    let item = |name: &str, weight: i32, score: i32| {
        json!({"offering": key("CS111"), "assessment_name": name, "weight": weight, "scores": [{"student": sid, "score": score}]})
    };
    r.step("submit coursework", lec, "POST", "/api/coursework", Some(item("Assignment 1", 40, 34)), Expect::Ok).await?;
    r.step("coursework weight overflow", lec, "POST", "/api/coursework", Some(item("Project", 70, 50)), Expect::Err("weight-overflow")).await?;
    r.step("student coursework", stu, "GET", &format!("/api/students/{sid}/coursework?term=2024-S1"), None, Expect::Ok).await?;
    r.step("student details", lec, "GET", &format!("/api/students/{sid}"), None, Expect::Ok).await?;
    r.step("student details by student", stu, "GET", &format!("/api/students/{sid}"), None, Expect::Err("forbidden")).await?;
    for (unit, grade) in [("CS111", "A"), ("CS112", "B+")] {
        r.step(&format!("grades {unit}"), lec, "POST", "/api/grades",
            Some(json!({"offering": key(unit), "grades": [{"student": sid, "grade": grade}]})), Expect::Ok).await?;
    }
    r.step("academic history", stu, "GET", &format!("/api/students/{sid}/history"), None, Expect::Ok).await?;

    r.step("invoices", stu, "GET", "/api/invoices", None, Expect::Ok).await?;
    let invoice = format!("INV-{sid}-2024-S1");
    let pay = |amount: i64, card: &str| json!({"invoice": invoice, "amount": amount, "card_reference": card});
    r.step("overpayment", stu, "POST", "/api/payments", Some(pay(5000, "4111111111111111")), Expect::Err("overpayment")).await?;
    r.step("declined card", stu, "POST", "/api/payments", Some(pay(500, "4000000000000000")), Expect::Err("gateway-declined")).await?;
    let paid = r.step("partial payment", stu, "POST", "/api/payments", Some(pay(500, "4111111111111111")), Expect::Ok).await?;
    r.alias(&paid["id"], "payment-1");
    r.step("invoice after payment", stu, "GET", "/api/invoices", None, Expect::Ok).await?;

    r.step("graduation eligibility", stu, "GET", &format!("/api/students/{sid}/eligibility"), None, Expect::Ok).await?;
    let g1 = r.step("apply for graduation", stu, "POST", "/api/graduation", None, Expect::Ok).await?;
    r.alias(&g1["id"], "graduation-1");
    let g1 = g1["id"].as_str().unwrap_or_default().to_string();
    r.step("pending graduations", admin, "GET", "/api/graduation?status=pending", None, Expect::Ok).await?;
    r.step("approve ineligible graduation", admin, "POST", &format!("/api/graduation/{g1}/decision"),
        Some(json!({"decision": "approve"})), Expect::Err("not-eligible")).await?;
    r.step("reject graduation", admin, "POST", &format!("/api/graduation/{g1}/decision"), Some(json!({"decision": "reject"})), Expect::Ok).await?;
    r.step("enroll CS211", stu, "POST", "/api/enrollments", Some(json!({"student": sid, "offering": key("CS211")})), Expect::Ok).await?;
    r.step("grades CS211", lec, "POST", "/api/grades",
        Some(json!({"offering": key("CS211"), "grades": [{"student": sid, "grade": "A+"}]})), Expect::Ok).await?;
    r.step("history with GPA", stu, "GET", &format!("/api/students/{sid}/history"), None, Expect::Ok).await?;
    r.step("eligible now", stu, "GET", &format!("/api/students/{sid}/eligibility"), None, Expect::Ok).await?;
    let g2 = r.step("apply again", stu, "POST", "/api/graduation", None, Expect::Ok).await?;
    r.alias(&g2["id"], "graduation-2");
    let g2 = g2["id"].as_str().unwrap_or_default().to_string();
    r.step("approve graduation", admin, "POST", &format!("/api/graduation/{g2}/decision"), Some(json!({"decision": "approve"})), Expect::Ok).await?;
    r.step("graduated profile", stu, "GET", &format!("/api/people/{sid}/profile"), None, Expect::Ok).await?;

    r.login("other", "S1002", "s1002-pw").await?;
    r.step("enroll MA111", other, "POST", "/api/enrollments", Some(json!({"student": "S1002", "offering": key("MA111")})), Expect::Ok).await?;
    r.step("withdraw MA111", other, "DELETE", "/api/enrollments", Some(json!({"student": "S1002", "offering": key("MA111")})), Expect::Ok).await?;
    r.step("invoice after withdrawal", other, "GET", "/api/invoices", None, Expect::Ok).await?;
    let pc = r.step("request program change", other, "POST", "/api/program-change",
        Some(json!({"new_program": "BSMA"})), Expect::Ok).await?;
    r.alias(&pc["id"], "program-change-1");
    let pc = pc["id"].as_str().unwrap_or_default().to_string();
    r.step("pending program changes", admin, "GET", "/api/program-change?status=pending", None, Expect::Ok).await?;
    r.step("approve program change", admin, "POST", &format!("/api/program-change/{pc}/decision"),
        Some(json!({"decision": "approve"})), Expect::Ok).await?;
    r.step("new program requirements", other, "GET", "/api/students/S1002/requirements", None, Expect::Ok).await?;

    for kind in ["enrollment_counts", "pass_rates", "application_funnel"] {
        r.step(&format!("report {kind}"), admin, "GET", &format!("/api/reports/{kind}?term=2024-S1"), None, Expect::Ok).await?;
    }
    r.step("report by student", stu, "GET", "/api/reports/pass_rates?term=2024-S1", None, Expect::Err("forbidden")).await?;
    r.step("staff profile", lec, "GET", "/api/people/LEC1/profile", None, Expect::Ok).await?;
    r.step("HR system", lec, "GET", "/api/hr", None, Expect::Redirect).await?;
    r.step("sign out", stu, "POST", "/api/logout", None, Expect::Ok).await?;
    r.step("signed-out token", stu, "GET", "/api/session", None, Expect::Err("token-unknown")).await?;
    Ok(r.render())
}

//! Loads a tabular fixture through the public API.

use std::collections::BTreeMap;
use std::fmt;

use cis_domain::fixture::{parse_fixture, FixtureEntity, FixtureError};
use cis_domain::{contract, Field};
use cis_gateway::json::to_json;
use cis_middleware::{IdlType, Value};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::api::{Api, ApiError};

pub const KINDS: [&str; 4] = ["unit", "program", "staff", "student"];

#[derive(Debug, Error)]
pub enum SeedError {
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("fixture line {line}: {kind} {id} rejected with {status} {code}: {detail}")]
    Rejected { line: usize, kind: &'static str, id: String, status: u16, code: String, detail: String },
    #[error(transparent)]
    Api(#[from] ApiError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedReport {
    pub created: BTreeMap<&'static str, usize>,
    pub skipped: BTreeMap<&'static str, usize>,
}

impl fmt::Display for SeedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in KINDS {
            let c = self.created.get(k).copied().unwrap_or(0);
            let s = self.skipped.get(k).copied().unwrap_or(0);
            writeln!(f, "{k}\tcreated {c}\tskipped {s}")?;
        }
        Ok(())
    }
}

fn body(v: Value, record: &str) -> Json {
    to_json(&v, &IdlType::Record(record.into()), &contract::doc()).expect("domain values match the contract")
}

fn request(e: &FixtureEntity) -> (&'static str, Json) {
    match e {
        FixtureEntity::Unit(u) => ("/api/units", body(u.to_value(), "Unit")),
        FixtureEntity::Program(p) => ("/api/programs", body(p.to_value(), "Program")),
        FixtureEntity::Staff { staff, password } => {
            ("/api/staff", json!({"staff": body(staff.to_value(), "Staff"), "password": password}))
        }
        FixtureEntity::Student { student, password } => {
            ("/api/students", json!({"student": body(student.to_value(), "Student"), "password": password}))
        }
    }
}

/// Creates each fixture entity in file order. Existing ids are skipped
/// unless `strict`, in which case the first conflict is an error.
pub async fn seed(api: &Api, token: &str, fixture: &str, strict: bool) -> Result<SeedReport, SeedError> {
    let lines = parse_fixture(fixture)?;
    let mut report = SeedReport::default();
    for l in &lines {
        let kind = l.entity.kind();
        let (path, json) = request(&l.entity);
        let r = api.send("POST", path, Some(token), Some(&json)).await?;
        if r.is_ok() {
            *report.created.entry(kind).or_default() += 1;
        } else if !strict && r.code() == Some("duplicate-record") {
            *report.skipped.entry(kind).or_default() += 1;
        } else {
            return Err(SeedError::Rejected {
                line: l.line,
                kind,
                id: l.entity.id().to_string(),
                status: r.status,
                code: r.code().unwrap_or("?").to_string(),
                detail: r.body.get("detail").and_then(Json::as_str).unwrap_or_default().to_string(),
            });
        }
    }
    Ok(report)
}

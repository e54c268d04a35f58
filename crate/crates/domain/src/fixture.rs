//! Tab-separated seed fixtures.
//!
//! One entity per line; the first field names the kind. Blank lines and
//! lines starting with `#` are ignored. `-` stands for an empty list or an
//! absent value. Lists are comma-separated.
//!
//! ```text
//! unit     CODE  Title  credit_points  PREREQ,PREREQ
//! program  ID    Title  UNIT,UNIT      MAJOR=UNIT+UNIT;MAJOR=UNIT
//! staff    ID    Name   role           password  [postal  residential  home  mobile]
//! student  ID    Name   PROGRAM        major     password  [postal  residential  home  mobile]
//! ```
//!
//! Order matters: units before the programs and units that reference them.

use thiserror::Error;

use crate::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureEntity {
    Unit(Unit),
    Program(Program),
    Staff { staff: Staff, password: String },
    Student { student: Student, password: String },
}

impl FixtureEntity {
    pub fn kind(&self) -> &'static str {
        match self {
            FixtureEntity::Unit(_) => "unit",
            FixtureEntity::Program(_) => "program",
            FixtureEntity::Staff { .. } => "staff",
            FixtureEntity::Student { .. } => "student",
        }
    }

    pub fn id(&self) -> &str {
        match self {
            FixtureEntity::Unit(u) => &u.code,
            FixtureEntity::Program(p) => &p.id,
            FixtureEntity::Staff { staff, .. } => &staff.id,
            FixtureEntity::Student { student, .. } => &student.id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureLine {
    pub line: usize,
    pub entity: FixtureEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("fixture line {line}: {message}")]
pub struct FixtureError {
    pub line: usize,
    pub message: String,
}

fn list(field: &str) -> Vec<String> {
    if field == "-" || field.is_empty() {
        return Vec::new();
    }
    field.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn contact(fields: &[&str]) -> ContactInfo {
    let get = |i: usize| fields.get(i).map(|s| s.to_string()).unwrap_or_default();
    ContactInfo { postal_address: get(0), residential_address: get(1), home_phone: get(2), mobile_phone: get(3) }
}

fn parse_majors(field: &str) -> Result<Vec<Major>, String> {
    if field == "-" || field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|m| {
            let (name, units) = m.split_once('=').ok_or_else(|| format!("major `{m}` lacks `=`"))?;
            Ok(Major {
                name: name.trim().to_string(),
                extra_units: units.split('+').map(|u| u.trim().to_string()).filter(|u| !u.is_empty()).collect(),
            })
        })
        .collect()
}

pub fn parse_fixture(text: &str) -> Result<Vec<FixtureLine>, FixtureError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| FixtureError { line, message };
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let f: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        let need = |n: usize| {
            if f.len() < n {
                Err(err(format!("`{}` needs at least {} fields, found {}", f[0], n, f.len())))
            } else {
                Ok(())
            }
        };
        let entity = match f[0] {
            "unit" => {
                need(5)?;
                let credit_points = f[3].parse().map_err(|_| err(format!("credit points `{}` is not a number", f[3])))?;
                FixtureEntity::Unit(Unit {
                    code: f[1].into(),
                    title: f[2].into(),
                    credit_points,
                    prerequisites: list(f[4]),
                })
            }
            "program" => {
                need(5)?;
                FixtureEntity::Program(Program {
                    id: f[1].into(),
                    title: f[2].into(),
                    required_units: list(f[3]),
                    majors: parse_majors(f[4]).map_err(err)?,
                })
            }
            "staff" => {
                need(5)?;
                let role: Role = f[3].parse().map_err(err)?;
                FixtureEntity::Staff {
                    staff: Staff {
                        id: f[1].into(),
                        name: f[2].into(),
                        contact: contact(&f[5..]),
                        role,
                        teaching_assignments: Vec::new(),
                    },
                    password: f[4].into(),
                }
            }
            "student" => {
                need(6)?;
                FixtureEntity::Student {
                    student: Student {
                        id: f[1].into(),
                        name: f[2].into(),
                        contact: contact(&f[6..]),
                        program: f[3].into(),
                        major: (f[4] != "-" && !f[4].is_empty()).then(|| f[4].to_string()),
                        status: StudentStatus::Admitted,
                    },
                    password: f[5].into(),
                }
            }
            other => return Err(err(format!("unknown entity kind `{other}`"))),
        };
        out.push(FixtureLine { line, entity });
    }
    Ok(out)
}

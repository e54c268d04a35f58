//! Business entities and rules of the campus information system.
//!
//! Operations are plain functions over a [`Repo`] handle. They know nothing
//! about HTTP, wire formats or storage files; the caller supplies
//! serialization of writers and the transaction around each call.

pub mod admissions;
pub mod audit;
pub mod contract;
pub mod directory;
pub mod enrollment;
mod error;
pub mod finance;
pub mod fixture;
pub mod model;
mod policy;
pub mod records;
mod repo;
pub mod reports;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use error::{DomainError, DomainResult};
pub use model::*;
pub use policy::{GradeDef, GradeScale, Policy};
pub use repo::{exists, load, next_counter, remove, save, scan, Entity, MemRepo, Repo};

use std::collections::BTreeSet;

use error::invalid;

/// The authenticated caller of an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub id: String,
    pub role: Role,
}

impl Actor {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        Actor { id: id.into(), role }
    }
}

/// Identifiers are ASCII letters, digits and `_`, so they can sit inside
/// composite keys and URL paths unescaped.
pub fn check_id(what: &str, id: &str) -> DomainResult<()> {
    if id.is_empty() || id.len() > 64 || !id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
        return Err(invalid(format!("{what} `{id}` must be 1-64 letters, digits or _")));
    }
    Ok(())
}

pub fn check_term(term: &str) -> DomainResult<Term> {
    term.parse::<Term>().map_err(invalid)
}

fn check_campus(campus: &str) -> DomainResult<()> {
    if campus.is_empty() || campus.contains([':', '/']) || campus.chars().any(char::is_control) {
        return Err(invalid(format!("campus `{campus}` is empty or contains `:` or `/`")));
    }
    Ok(())
}

pub fn check_offering_key(k: &OfferingKey) -> DomainResult<()> {
    check_id("unit code", &k.unit)?;
    check_campus(&k.campus)?;
    check_term(&k.term)?;
    Ok(())
}

pub(crate) fn require_student(repo: &dyn Repo, id: &str) -> DomainResult<Student> {
    load::<Student>(repo, id)?.ok_or_else(|| DomainError::UnknownPerson(id.to_string()))
}

pub(crate) fn require_offering(repo: &dyn Repo, key: &OfferingKey) -> DomainResult<Offering> {
    load::<Offering>(repo, &key.to_string())?.ok_or_else(|| DomainError::UnknownOffering(key.to_string()))
}

pub(crate) fn require_unit(repo: &dyn Repo, code: &str) -> DomainResult<Unit> {
    load::<Unit>(repo, code)?.ok_or_else(|| DomainError::UnknownUnit(code.to_string()))
}

/// Students may only look at their own records; staff may look at anyone's.
pub(crate) fn check_self_or_staff(actor: &Actor, student: &str) -> DomainResult<()> {
    if actor.role.is_staff() || actor.id == student {
        Ok(())
    } else {
        Err(DomainError::NotAuthorized(format!("{} may not view records of {student}", actor.id)))
    }
}

pub(crate) fn require_admin(actor: &Actor, what: &str) -> DomainResult<()> {
    if actor.role.is_admin() {
        Ok(())
    } else {
        Err(DomainError::NotAuthorized(format!("{what} requires an administration role")))
    }
}

/// All enrollments of a student, in offering-key order.
pub fn student_enrollments(repo: &dyn Repo, student: &str) -> DomainResult<Vec<Enrollment>> {
    let refs = scan::<EnrollmentRef>(repo, &format!("{student}/"))?;
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let key = format!("{}/{}", r.offering, r.student);
        match load::<Enrollment>(repo, &key)? {
            Some(e) => out.push(e),
            None => return Err(DomainError::Storage(format!("dangling enrollment index {key}"))),
        }
    }
    Ok(out)
}

/// Enrollments in one offering, in student-id order.
pub fn offering_enrollments(repo: &dyn Repo, key: &OfferingKey) -> DomainResult<Vec<Enrollment>> {
    scan::<Enrollment>(repo, &format!("{key}/"))
}

/// Units the student completed with a passing grade.
pub fn passed_units(repo: &dyn Repo, policy: &Policy, student: &str) -> DomainResult<BTreeSet<String>> {
    Ok(student_enrollments(repo, student)?
        .into_iter()
        .filter(|e| {
            e.status == EnrollmentStatus::Completed
                && e.final_grade.as_deref().is_some_and(|g| policy.grades.is_passing(g))
        })
        .map(|e| e.offering.unit)
        .collect())
}

/// Required units of the student's program followed by any extras of the
/// student's major, without duplicates.
pub fn required_units(repo: &dyn Repo, student: &Student) -> DomainResult<Vec<String>> {
    let program = load::<Program>(repo, &student.program)?
        .ok_or_else(|| DomainError::UnknownProgram(student.program.clone()))?;
    let mut units = program.required_units.clone();
    if let Some(major) = &student.major {
        let m = program
            .majors
            .iter()
            .find(|m| &m.name == major)
            .ok_or_else(|| DomainError::Storage(format!("major {major} not in program {}", program.id)))?;
        for u in &m.extra_units {
            if !units.contains(u) {
                units.push(u.clone());
            }
        }
    }
    Ok(units)
}

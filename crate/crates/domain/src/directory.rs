//! Profiles, student details and catalog maintenance.

use std::collections::BTreeSet;

use crate::error::invalid;
use crate::*;

fn profile_of(repo: &dyn Repo, person: &str) -> DomainResult<Profile> {
    if let Some(s) = load::<Student>(repo, person)? {
        return Ok(Profile {
            id: s.id,
            name: s.name,
            role: Role::Student,
            contact: s.contact,
            program: Some(s.program),
            major: s.major,
            status: Some(s.status),
        });
    }
    if let Some(s) = load::<Staff>(repo, person)? {
        return Ok(Profile {
            id: s.id,
            name: s.name,
            role: s.role,
            contact: s.contact,
            program: None,
            major: None,
            status: None,
        });
    }
    Err(DomainError::UnknownPerson(person.to_string()))
}

fn check_self_or_admin(actor: &Actor, target: &str) -> DomainResult<()> {
    if actor.id == target || actor.role.is_admin() {
        Ok(())
    } else {
        Err(DomainError::NotAuthorized(format!("{} may not access the profile of {target}", actor.id)))
    }
}

pub fn get_profile(repo: &dyn Repo, actor: &Actor, person: &str) -> DomainResult<Profile> {
    check_self_or_admin(actor, person)?;
    profile_of(repo, person)
}

/// Replaces contact details only; identity, program and status stay as they are.
pub fn update_profile(repo: &mut dyn Repo, actor: &Actor, person: &str, contact: &ContactInfo) -> DomainResult<Profile> {
    check_self_or_admin(actor, person)?;
    if let Some(mut s) = load::<Student>(repo, person)? {
        s.contact = contact.clone();
        save(repo, &s)?;
    } else if let Some(mut s) = load::<Staff>(repo, person)? {
        s.contact = contact.clone();
        save(repo, &s)?;
    } else {
        return Err(DomainError::UnknownPerson(person.to_string()));
    }
    profile_of(repo, person)
}

pub fn student_details(repo: &dyn Repo, policy: &Policy, actor: &Actor, student: &str) -> DomainResult<StudentDetails> {
    if !actor.role.is_staff() {
        return Err(DomainError::NotAuthorized("student details are for staff".into()));
    }
    require_student(repo, student)?;
    Ok(StudentDetails { profile: profile_of(repo, student)?, history: records::history_of(repo, policy, student)? })
}

pub fn list_programs(repo: &dyn Repo) -> DomainResult<Vec<Program>> {
    scan::<Program>(repo, "")
}

pub fn list_units(repo: &dyn Repo) -> DomainResult<Vec<Unit>> {
    scan::<Unit>(repo, "")
}

fn require_catalog_role(actor: &Actor) -> DomainResult<()> {
    if actor.role == Role::AcademicServices {
        Ok(())
    } else {
        Err(DomainError::NotAuthorized("catalog maintenance is for academic services".into()))
    }
}

fn check_units_exist(repo: &dyn Repo, units: &[String]) -> DomainResult<()> {
    for u in units {
        require_unit(repo, u)?;
    }
    Ok(())
}

fn check_distinct(what: &str, items: &[String]) -> DomainResult<()> {
    let mut seen = BTreeSet::new();
    for i in items {
        if !seen.insert(i) {
            return Err(invalid(format!("{what} lists `{i}` twice")));
        }
    }
    Ok(())
}

fn person_id_taken(repo: &dyn Repo, id: &str) -> DomainResult<bool> {
    Ok(exists::<Student>(repo, id)? || exists::<Staff>(repo, id)?)
}

pub fn create_unit(repo: &mut dyn Repo, actor: &Actor, unit: &Unit) -> DomainResult<Unit> {
    require_catalog_role(actor)?;
    check_id("unit code", &unit.code)?;
    if unit.title.trim().is_empty() {
        return Err(invalid("unit title is required"));
    }
    if unit.credit_points <= 0 {
        return Err(invalid("credit points must be positive"));
    }
    if unit.prerequisites.contains(&unit.code) {
        return Err(invalid(format!("unit {} lists itself as a prerequisite", unit.code)));
    }
    check_distinct("prerequisites", &unit.prerequisites)?;
    if exists::<Unit>(repo, &unit.code)? {
        return Err(DomainError::DuplicateRecord(format!("unit {}", unit.code)));
    }
    // Prerequisites must already exist, so the graph stays acyclic by construction.
    check_units_exist(repo, &unit.prerequisites)?;
    save(repo, unit)?;
    Ok(unit.clone())
}

pub fn create_program(repo: &mut dyn Repo, actor: &Actor, program: &Program) -> DomainResult<Program> {
    require_catalog_role(actor)?;
    check_id("program id", &program.id)?;
    if program.title.trim().is_empty() {
        return Err(invalid("program title is required"));
    }
    if program.required_units.is_empty() {
        return Err(invalid("a program needs at least one required unit"));
    }
    check_distinct("required units", &program.required_units)?;
    let names: Vec<String> = program.majors.iter().map(|m| m.name.clone()).collect();
    check_distinct("majors", &names)?;
    if exists::<Program>(repo, &program.id)? {
        return Err(DomainError::DuplicateRecord(format!("program {}", program.id)));
    }
    check_units_exist(repo, &program.required_units)?;
    for m in &program.majors {
        check_id("major", &m.name)?;
        check_distinct("major units", &m.extra_units)?;
        check_units_exist(repo, &m.extra_units)?;
    }
    save(repo, program)?;
    Ok(program.clone())
}

pub fn create_staff(repo: &mut dyn Repo, actor: &Actor, staff: &Staff) -> DomainResult<Staff> {
    require_catalog_role(actor)?;
    check_id("staff id", &staff.id)?;
    if !staff.role.is_staff() {
        return Err(invalid("staff role must be academic or administration"));
    }
    if staff.name.trim().is_empty() {
        return Err(invalid("name is required"));
    }
    if person_id_taken(repo, &staff.id)? {
        return Err(DomainError::DuplicateRecord(format!("person {}", staff.id)));
    }
    save(repo, staff)?;
    Ok(staff.clone())
}

pub fn create_student(repo: &mut dyn Repo, actor: &Actor, student: &Student) -> DomainResult<Student> {
    require_catalog_role(actor)?;
    check_id("student id", &student.id)?;
    if student.name.trim().is_empty() {
        return Err(invalid("name is required"));
    }
    if !matches!(student.status, StudentStatus::Admitted | StudentStatus::Active) {
        return Err(invalid("new students start admitted or active"));
    }
    if person_id_taken(repo, &student.id)? {
        return Err(DomainError::DuplicateRecord(format!("person {}", student.id)));
    }
    let program =
        load::<Program>(repo, &student.program)?.ok_or_else(|| DomainError::UnknownProgram(student.program.clone()))?;
    if let Some(major) = &student.major {
        if !program.majors.iter().any(|m| &m.name == major) {
            return Err(invalid(format!("program {} has no major {major}", program.id)));
        }
    }
    save(repo, student)?;
    Ok(student.clone())
}

//! Offerings, enrollment and withdrawal, with the invoice lines they drive.

use crate::error::invalid;
use crate::finance;
use crate::*;

fn seats_taken(repo: &dyn Repo, key: &OfferingKey) -> DomainResult<i32> {
    Ok(offering_enrollments(repo, key)?
        .iter()
        .filter(|e| e.status != EnrollmentStatus::Withdrawn)
        .count() as i32)
}

/// Offerings in `term` (all terms when absent) with their seat counts.
pub fn list_offerings(repo: &dyn Repo, term: Option<&str>) -> DomainResult<Vec<OfferingSummary>> {
    if let Some(t) = term {
        check_term(t)?;
    }
    let mut out = Vec::new();
    for o in scan::<Offering>(repo, "")? {
        if term.is_some_and(|t| t != o.term) {
            continue;
        }
        let unit = require_unit(repo, &o.unit)?;
        let key = o.key();
        out.push(OfferingSummary {
            key: key.to_string(),
            unit: o.unit.clone(),
            title: unit.title,
            credit_points: unit.credit_points,
            campus: o.campus.clone(),
            term: o.term.clone(),
            capacity: o.capacity,
            enrolled: seats_taken(repo, &key)?,
            active: o.active,
            teacher: o.teacher.clone(),
        });
    }
    Ok(out)
}

/// Heads of department activate a unit at a campus for a term, together
/// with its class and exam timetable.
pub fn activate_offering(repo: &mut dyn Repo, policy: &Policy, actor: &Actor, req: &OfferingRequest) -> DomainResult<Offering> {
    if actor.role != Role::HeadOfDepartment {
        return Err(DomainError::NotAuthorized("only a head of department activates units".into()));
    }
    let key = OfferingKey::new(&req.unit, &req.campus, &req.term);
    check_offering_key(&key)?;
    require_unit(repo, &req.unit)?;
    if req.capacity < 0 {
        return Err(invalid("capacity must be positive"));
    }
    let capacity = if req.capacity == 0 { policy.default_capacity } else { req.capacity };
    let mut exams = 0;
    for slot in &req.timetable {
        let (start, end) = match (parse_time(&slot.start), parse_time(&slot.end)) {
            (Some(s), Some(e)) => (s, e),
            _ => return Err(invalid(format!("times must be HH:MM, got {}-{}", slot.start, slot.end))),
        };
        if start >= end {
            return Err(invalid(format!("slot {}-{} ends before it starts", slot.start, slot.end)));
        }
        if slot.kind == EntryKind::FinalExam {
            exams += 1;
        }
    }
    if exams > 1 {
        return Err(invalid("an offering has at most one final exam"));
    }
    if exists::<Offering>(repo, &key.to_string())? {
        return Err(DomainError::DuplicateOffering(key.to_string()));
    }
    if let Some(t) = &req.teacher {
        let mut staff = load::<Staff>(repo, t)?.ok_or_else(|| DomainError::UnknownPerson(t.clone()))?;
        if !staff.role.is_academic() {
            return Err(invalid(format!("teacher {t} is not academic staff")));
        }
        staff.teaching_assignments.push(TeachingAssignment {
            unit: key.unit.clone(),
            term: key.term.clone(),
            campus: key.campus.clone(),
        });
        save(repo, &staff)?;
    }
    let offering = Offering {
        unit: key.unit.clone(),
        campus: key.campus.clone(),
        term: key.term.clone(),
        capacity,
        active: true,
        teacher: req.teacher.clone(),
    };
    save(repo, &offering)?;
    for slot in &req.timetable {
        let entry = TimetableEntry {
            offering: key.clone(),
            kind: slot.kind,
            day: slot.day,
            start: slot.start.clone(),
            end: slot.end.clone(),
            room: slot.room.clone(),
        };
        if exists::<TimetableEntry>(repo, &entry.key())? {
            return Err(invalid(format!("two {} slots start at {} {}", entry.kind, entry.day, entry.start)));
        }
        save(repo, &entry)?;
    }
    Ok(offering)
}

/// Students enroll themselves subject to prerequisites; academic staff may
/// enroll any student, bypassing prerequisites but not capacity.
pub fn enroll(repo: &mut dyn Repo, policy: &Policy, actor: &Actor, student: &str, key: &OfferingKey) -> DomainResult<Enrollment> {
    if actor.role.is_admin() {
        return Err(DomainError::NotAuthorized("administration staff do not enroll students".into()));
    }
    if actor.role.is_student() && actor.id != student {
        return Err(DomainError::NotAuthorized(format!("{} may only enroll themselves", actor.id)));
    }
    check_offering_key(key)?;
    let offering = require_offering(repo, key)?;
    if !offering.active {
        return Err(DomainError::OfferingInactive(key.to_string()));
    }
    let mut s = require_student(repo, student)?;
    if !matches!(s.status, StudentStatus::Admitted | StudentStatus::Active) {
        return Err(DomainError::StudentInactive(student.to_string()));
    }
    let clash = student_enrollments(repo, student)?.into_iter().any(|e| {
        e.offering.unit == key.unit && e.offering.term == key.term && e.status != EnrollmentStatus::Withdrawn
    });
    if clash {
        return Err(DomainError::DuplicateEnrollment {
            student: student.to_string(),
            unit: key.unit.clone(),
            term: key.term.clone(),
        });
    }
    let unit = require_unit(repo, &key.unit)?;
    let override_by = if actor.role.is_student() {
        let passed = passed_units(repo, policy, student)?;
        let missing: Vec<String> = unit.prerequisites.iter().filter(|p| !passed.contains(*p)).cloned().collect();
        if !missing.is_empty() {
            return Err(DomainError::PrerequisiteUnmet(missing));
        }
        None
    } else {
        Some(actor.id.clone())
    };
    if seats_taken(repo, key)? >= offering.capacity {
        return Err(DomainError::CapacityFull(key.to_string()));
    }
    let e = Enrollment {
        student: student.to_string(),
        offering: key.clone(),
        status: EnrollmentStatus::Enrolled,
        override_by,
        final_grade: None,
    };
    save(repo, &e)?;
    save(repo, &EnrollmentRef { student: student.to_string(), offering: key.clone() })?;
    if s.status == StudentStatus::Admitted {
        s.status = StudentStatus::Active;
        save(repo, &s)?;
    }
    finance::add_line(
        repo,
        student,
        &key.term,
        format!("{} {} {} ({} credits)", unit.code, key.campus, unit.title, unit.credit_points),
        unit.credit_points as i64 * policy.fee_per_credit,
    )?;
    Ok(e)
}

/// Releases the seat and refunds the unit's fee with a negative invoice line.
pub fn withdraw(repo: &mut dyn Repo, policy: &Policy, actor: &Actor, student: &str, key: &OfferingKey) -> DomainResult<Enrollment> {
    if actor.role.is_student() && actor.id != student {
        return Err(DomainError::NotAuthorized(format!("{} may only withdraw themselves", actor.id)));
    }
    check_offering_key(key)?;
    let ekey = format!("{key}/{student}");
    let mut e = load::<Enrollment>(repo, &ekey)?.ok_or_else(|| DomainError::NotEnrolled(ekey.clone()))?;
    match e.status {
        EnrollmentStatus::Completed => return Err(DomainError::AlreadyCompleted(ekey)),
        EnrollmentStatus::Withdrawn => return Err(DomainError::NotEnrolled(ekey)),
        EnrollmentStatus::Enrolled => {}
    }
    e.status = EnrollmentStatus::Withdrawn;
    save(repo, &e)?;
    let unit = require_unit(repo, &key.unit)?;
    finance::add_line(
        repo,
        student,
        &key.term,
        format!("Withdrawal {} {} refund", unit.code, key.campus),
        -(unit.credit_points as i64 * policy.fee_per_credit),
    )?;
    Ok(e)
}

pub fn list_enrollments(repo: &dyn Repo, actor: &Actor, student: &str) -> DomainResult<Vec<Enrollment>> {
    check_self_or_staff(actor, student)?;
    student_enrollments(repo, student)
}

//! Academic records: requirements, coursework, grades, history, timetable,
//! graduation and program changes.

use std::collections::BTreeSet;

use num_rational::Ratio;

use crate::error::invalid;
use crate::*;

pub fn program_requirements(repo: &dyn Repo, policy: &Policy, actor: &Actor, student: &str) -> DomainResult<Vec<RequirementRow>> {
    check_self_or_staff(actor, student)?;
    let s = require_student(repo, student)?;
    let passed = passed_units(repo, policy, student)?;
    required_units(repo, &s)?
        .into_iter()
        .map(|u| {
            let title = require_unit(repo, &u)?.title;
            Ok(RequirementRow { completed: passed.contains(&u), unit: u, title })
        })
        .collect()
}

/// Credit-weighted mean of grade points over completed units, exact.
pub fn gpa(rows: &[(i64, i64)]) -> Option<Ratio<i64>> {
    let credits: i64 = rows.iter().map(|(_, c)| c).sum();
    if credits == 0 {
        return None;
    }
    let weighted: i64 = rows.iter().map(|(p, c)| p * c).sum();
    Some(Ratio::new(weighted, credits * 10))
}

/// Renders a non-negative ratio with two decimals, rounding half up.
pub fn format_ratio(r: &Ratio<i64>) -> String {
    let hundredths = (r.numer() * 200 + r.denom()) / (r.denom() * 2);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

pub(crate) fn history_of(repo: &dyn Repo, policy: &Policy, student: &str) -> DomainResult<History> {
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for e in student_enrollments(repo, student)? {
        if e.status != EnrollmentStatus::Completed {
            continue;
        }
        let grade = e.final_grade.clone().ok_or_else(|| DomainError::Storage(format!("completed without grade: {}", e.offering)))?;
        let unit = require_unit(repo, &e.offering.unit)?;
        let def = policy.grades.check(&grade)?;
        points.push((def.points_tenths, unit.credit_points as i64));
        rows.push(HistoryRow {
            unit: unit.code,
            title: unit.title,
            term: e.offering.term.clone(),
            grade,
            credit_points: unit.credit_points,
        });
    }
    rows.sort_by(|a, b| {
        let ta = a.term.parse::<Term>().ok();
        let tb = b.term.parse::<Term>().ok();
        ta.cmp(&tb).then_with(|| a.unit.cmp(&b.unit))
    });
    let g = gpa(&points);
    Ok(History {
        student: student.to_string(),
        rows,
        gpa_text: g.as_ref().map(format_ratio),
        gpa: g.map(|r| Rational { num: *r.numer(), den: *r.denom() }),
    })
}

pub fn academic_history(repo: &dyn Repo, policy: &Policy, actor: &Actor, student: &str) -> DomainResult<History> {
    check_self_or_staff(actor, student)?;
    require_student(repo, student)?;
    history_of(repo, policy, student)
}

/// Class and exam slots of the offerings the student holds in `term`,
/// ordered by weekday then start time.
pub fn timetable(repo: &dyn Repo, actor: &Actor, student: &str, term: &str) -> DomainResult<Vec<TimetableEntry>> {
    check_self_or_staff(actor, student)?;
    check_term(term)?;
    require_student(repo, student)?;
    let mut out = Vec::new();
    for e in student_enrollments(repo, student)? {
        if e.offering.term == term && e.status != EnrollmentStatus::Withdrawn {
            out.extend(scan::<TimetableEntry>(repo, &format!("{}/", e.offering))?);
        }
    }
    out.sort_by(|a, b| {
        (a.day, parse_time(&a.start), &a.offering, a.kind).cmp(&(b.day, parse_time(&b.start), &b.offering, b.kind))
    });
    Ok(out)
}

/// Scores the student holds in `term`, one row per assessment.
pub fn coursework_for_student(repo: &dyn Repo, actor: &Actor, student: &str, term: &str) -> DomainResult<Vec<CourseworkRow>> {
    check_self_or_staff(actor, student)?;
    check_term(term)?;
    require_student(repo, student)?;
    let mut rows = Vec::new();
    for e in student_enrollments(repo, student)? {
        if e.offering.term != term {
            continue;
        }
        for item in scan::<CourseworkItem>(repo, &format!("{}/", e.offering))? {
            if let Some(s) = item.scores.iter().find(|s| s.student == student) {
                rows.push(CourseworkRow {
                    unit: e.offering.unit.clone(),
                    assessment_name: item.assessment_name.clone(),
                    weight: item.weight,
                    score: s.score,
                });
            }
        }
    }
    Ok(rows)
}

/// Students enrolled in or completed in the offering, by id.
pub fn class_list(repo: &dyn Repo, actor: &Actor, key: &OfferingKey) -> DomainResult<Vec<ClassListRow>> {
    if !actor.role.is_staff() {
        return Err(DomainError::NotAuthorized("class lists are for staff".into()));
    }
    check_offering_key(key)?;
    require_offering(repo, key)?;
    let mut rows = Vec::new();
    for e in offering_enrollments(repo, key)? {
        if e.status == EnrollmentStatus::Withdrawn {
            continue;
        }
        let name = load::<Student>(repo, &e.student)?.map(|s| s.name).unwrap_or_default();
        rows.push(ClassListRow { student: e.student, name });
    }
    Ok(rows)
}

fn holds_seat(repo: &dyn Repo, key: &OfferingKey, student: &str) -> DomainResult<bool> {
    Ok(load::<Enrollment>(repo, &format!("{key}/{student}"))?
        .is_some_and(|e| e.status != EnrollmentStatus::Withdrawn))
}

/// Stores an assessment for an offering the actor teaches. Resubmitting the
/// same assessment name replaces it.
pub fn submit_coursework(repo: &mut dyn Repo, actor: &Actor, item: &CourseworkItem) -> DomainResult<CourseworkItem> {
    check_offering_key(&item.offering)?;
    let offering = require_offering(repo, &item.offering)?;
    if offering.teacher.as_deref() != Some(actor.id.as_str()) {
        return Err(DomainError::NotAuthorized(format!("{} does not teach {}", actor.id, item.offering)));
    }
    let name = item.assessment_name.trim();
    if name.is_empty() || name.contains('/') {
        return Err(invalid("assessment name is empty or contains `/`"));
    }
    if !(0..=100).contains(&item.weight) {
        return Err(invalid("weight must be between 0 and 100"));
    }
    let mut seen = BTreeSet::new();
    for s in &item.scores {
        if !(0..=100).contains(&s.score) {
            return Err(invalid(format!("score for {} must be between 0 and 100", s.student)));
        }
        if !seen.insert(&s.student) {
            return Err(invalid(format!("student {} scored twice", s.student)));
        }
    }
    let others: i32 = scan::<CourseworkItem>(repo, &format!("{}/", item.offering))?
        .iter()
        .filter(|c| c.assessment_name != name)
        .map(|c| c.weight)
        .sum();
    if others + item.weight > 100 {
        return Err(DomainError::WeightOverflow(others + item.weight));
    }
    for s in &item.scores {
        if !holds_seat(repo, &item.offering, &s.student)? {
            return Err(DomainError::NotEnrolledStudent(s.student.clone()));
        }
    }
    let stored = CourseworkItem { assessment_name: name.to_string(), ..item.clone() };
    save(repo, &stored)?;
    Ok(stored)
}

/// Completes the listed enrollments with letter grades. Re-finalizing overwrites.
pub fn finalize_grades(repo: &mut dyn Repo, policy: &Policy, actor: &Actor, key: &OfferingKey, grades: &[GradeEntry]) -> DomainResult<i32> {
    check_offering_key(key)?;
    let offering = require_offering(repo, key)?;
    let teaches = offering.teacher.as_deref() == Some(actor.id.as_str());
    if !teaches && !actor.role.is_admin() {
        return Err(DomainError::NotAuthorized(format!("{} may not grade {key}", actor.id)));
    }
    for g in grades {
        policy.grades.check(&g.grade)?;
    }
    let mut count = 0;
    for g in grades {
        let ekey = format!("{key}/{}", g.student);
        let mut e = match load::<Enrollment>(repo, &ekey)? {
            Some(e) if e.status != EnrollmentStatus::Withdrawn => e,
            _ => return Err(DomainError::NotEnrolledStudent(g.student.clone())),
        };
        e.status = EnrollmentStatus::Completed;
        e.final_grade = Some(g.grade.clone());
        save(repo, &e)?;
        count += 1;
    }
    Ok(count)
}

/// Required units lacking a completed passing enrollment.
pub fn eligibility_of(repo: &dyn Repo, policy: &Policy, student: &Student) -> DomainResult<Eligibility> {
    let passed = passed_units(repo, policy, &student.id)?;
    let missing: Vec<String> = required_units(repo, student)?.into_iter().filter(|u| !passed.contains(u)).collect();
    Ok(Eligibility { student: student.id.clone(), eligible: missing.is_empty(), missing })
}

pub fn graduation_eligibility(repo: &dyn Repo, policy: &Policy, actor: &Actor, student: &str) -> DomainResult<Eligibility> {
    check_self_or_staff(actor, student)?;
    let s = require_student(repo, student)?;
    eligibility_of(repo, policy, &s)
}

pub fn apply_graduation(repo: &mut dyn Repo, policy: &Policy, actor: &Actor) -> DomainResult<GraduationApplication> {
    if !actor.role.is_student() {
        return Err(DomainError::NotAuthorized("only students apply for graduation".into()));
    }
    let s = require_student(repo, &actor.id)?;
    if s.status != StudentStatus::Active {
        return Err(DomainError::StudentInactive(s.id));
    }
    let pending = scan::<GraduationApplication>(repo, "")?
        .iter()
        .any(|g| g.student == s.id && g.status == RequestStatus::Pending);
    if pending {
        return Err(DomainError::DuplicateRequest(s.id));
    }
    let eligible = eligibility_of(repo, policy, &s)?.eligible;
    let n = next_counter(repo, "graduation")?;
    let g = GraduationApplication {
        id: format!("GRD{n:04}"),
        student: s.id,
        status: RequestStatus::Pending,
        eligibility_snapshot: eligible,
        decided_by: None,
    };
    save(repo, &g)?;
    Ok(g)
}

pub fn list_graduations(repo: &dyn Repo, policy: &Policy, actor: &Actor, status: Option<RequestStatus>) -> DomainResult<Vec<GraduationRow>> {
    require_admin(actor, "viewing graduations")?;
    let mut rows = Vec::new();
    for g in scan::<GraduationApplication>(repo, "")? {
        if status.is_some_and(|s| s != g.status) {
            continue;
        }
        let s = require_student(repo, &g.student)?;
        let el = eligibility_of(repo, policy, &s)?;
        rows.push(GraduationRow { application: g, name: s.name, eligible: el.eligible, missing: el.missing });
    }
    Ok(rows)
}

/// Approval requires eligibility at decision time and graduates the student.
/// Rejection is always allowed.
pub fn decide_graduation(repo: &mut dyn Repo, policy: &Policy, actor: &Actor, id: &str, decision: Decision) -> DomainResult<GraduationApplication> {
    require_admin(actor, "deciding graduations")?;
    let mut g = load::<GraduationApplication>(repo, id)?.ok_or_else(|| DomainError::UnknownRequest(id.to_string()))?;
    if g.status != RequestStatus::Pending {
        return Err(DomainError::AlreadyDecided(id.to_string()));
    }
    let mut s = require_student(repo, &g.student)?;
    let el = eligibility_of(repo, policy, &s)?;
    g.eligibility_snapshot = el.eligible;
    g.decided_by = Some(actor.id.clone());
    match decision {
        Decision::Approve => {
            if !el.eligible {
                return Err(DomainError::NotEligible(el.missing));
            }
            g.status = RequestStatus::Approved;
            s.status = StudentStatus::Graduated;
            save(repo, &s)?;
        }
        Decision::Reject => g.status = RequestStatus::Rejected,
    }
    save(repo, &g)?;
    Ok(g)
}

pub fn request_program_change(
    repo: &mut dyn Repo,
    actor: &Actor,
    new_program: &str,
    new_major: Option<&str>,
) -> DomainResult<ProgramChangeRequest> {
    if !actor.role.is_student() {
        return Err(DomainError::NotAuthorized("only students request program changes".into()));
    }
    let s = require_student(repo, &actor.id)?;
    let program = load::<Program>(repo, new_program)?.ok_or_else(|| DomainError::UnknownProgram(new_program.to_string()))?;
    if let Some(m) = new_major {
        if !program.majors.iter().any(|x| x.name == m) {
            return Err(invalid(format!("program {new_program} has no major {m}")));
        }
    }
    let n = next_counter(repo, "program_change")?;
    let r = ProgramChangeRequest {
        id: format!("PCR{n:04}"),
        student: s.id,
        new_program: new_program.to_string(),
        new_major: new_major.map(str::to_string),
        status: RequestStatus::Pending,
        decided_by: None,
    };
    save(repo, &r)?;
    Ok(r)
}

pub fn list_program_changes(repo: &dyn Repo, actor: &Actor, status: Option<RequestStatus>) -> DomainResult<Vec<ProgramChangeRequest>> {
    require_admin(actor, "viewing program changes")?;
    Ok(scan::<ProgramChangeRequest>(repo, "")?
        .into_iter()
        .filter(|r| status.is_none_or(|s| s == r.status))
        .collect())
}

/// Approval rewrites the student's program and major.
pub fn decide_program_change(repo: &mut dyn Repo, actor: &Actor, id: &str, decision: Decision) -> DomainResult<ProgramChangeRequest> {
    require_admin(actor, "deciding program changes")?;
    let mut r = load::<ProgramChangeRequest>(repo, id)?.ok_or_else(|| DomainError::UnknownRequest(id.to_string()))?;
    if r.status != RequestStatus::Pending {
        return Err(DomainError::AlreadyDecided(id.to_string()));
    }
    r.decided_by = Some(actor.id.clone());
    match decision {
        Decision::Approve => {
            if !exists::<Program>(repo, &r.new_program)? {
                return Err(DomainError::UnknownProgram(r.new_program.clone()));
            }
            let mut s = require_student(repo, &r.student)?;
            s.program = r.new_program.clone();
            s.major = r.new_major.clone();
            save(repo, &s)?;
            r.status = RequestStatus::Approved;
        }
        Decision::Reject => r.status = RequestStatus::Rejected,
    }
    save(repo, &r)?;
    Ok(r)
}

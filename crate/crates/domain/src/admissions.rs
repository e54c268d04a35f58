//! Applications to study and their one-shot decision.

use crate::error::invalid;
use crate::*;

/// Records a new pending application for the current term.
///
/// Repeat submissions by the same person are separate applications.
pub fn submit_application(repo: &mut dyn Repo, policy: &Policy, form: &ApplicationForm) -> DomainResult<Application> {
    if form.name.trim().is_empty() {
        return Err(invalid("applicant name is required"));
    }
    if !exists::<Program>(repo, &form.program)? {
        return Err(DomainError::UnknownProgram(form.program.clone()));
    }
    let n = next_counter(repo, "application")?;
    let app = Application {
        id: format!("APP{n:04}"),
        name: form.name.trim().to_string(),
        contact: form.contact.clone(),
        program: form.program.clone(),
        term: policy.current_term.clone(),
        status: RequestStatus::Pending,
        decided_by: None,
        student_id: None,
    };
    save(repo, &app)?;
    Ok(app)
}

pub fn list_applications(repo: &dyn Repo, actor: &Actor, status: Option<RequestStatus>) -> DomainResult<Vec<Application>> {
    require_admin(actor, "viewing applications")?;
    Ok(scan::<Application>(repo, "")?
        .into_iter()
        .filter(|a| status.is_none_or(|s| a.status == s))
        .collect())
}

pub fn get_application(repo: &dyn Repo, actor: &Actor, id: &str) -> DomainResult<Application> {
    require_admin(actor, "viewing applications")?;
    load::<Application>(repo, id)?.ok_or_else(|| DomainError::UnknownApplication(id.to_string()))
}

/// Smallest `S####` id not already used by a student or staff member.
pub fn allocate_student_id(repo: &mut dyn Repo) -> DomainResult<String> {
    loop {
        let n = next_counter(repo, "student")?;
        let id = format!("S{n:04}");
        if !exists::<Student>(repo, &id)? && !exists::<Staff>(repo, &id)? {
            return Ok(id);
        }
    }
}

/// Approving creates an admitted student in the applied-for program.
pub fn decide_application(repo: &mut dyn Repo, actor: &Actor, id: &str, decision: Decision) -> DomainResult<Application> {
    require_admin(actor, "deciding applications")?;
    let mut app = load::<Application>(repo, id)?.ok_or_else(|| DomainError::UnknownApplication(id.to_string()))?;
    if app.status != RequestStatus::Pending {
        return Err(DomainError::AlreadyDecided(id.to_string()));
    }
    app.decided_by = Some(actor.id.clone());
    match decision {
        Decision::Approve => {
            let sid = allocate_student_id(repo)?;
            save(
                repo,
                &Student {
                    id: sid.clone(),
                    name: app.name.clone(),
                    contact: app.contact.clone(),
                    program: app.program.clone(),
                    major: None,
                    status: StudentStatus::Admitted,
                },
            )?;
            app.status = RequestStatus::Approved;
            app.student_id = Some(sid);
        }
        Decision::Reject => app.status = RequestStatus::Rejected,
    }
    save(repo, &app)?;
    Ok(app)
}

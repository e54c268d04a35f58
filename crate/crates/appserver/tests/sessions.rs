mod common;

use cis_appserver::AppError;
use cis_domain::{Decision, Field, Role, Session};
use cis_middleware::Value;
use common::*;

#[test]
fn login_issues_distinct_tokens_for_the_stored_role() {
    let f = Fixture::new();
    f.seed();
    let a = f.app.login("HOD1", "pw").unwrap();
    let b = f.app.login("HOD1", "pw").unwrap();
    assert_ne!(a.token, b.token);
    assert_eq!(a.token.len(), 32);
    assert_eq!(a.role, Role::HeadOfDepartment);
    assert_eq!(a.expires_at, 1_700_000_000 + 8 * 3600);
    let who = Session::from_value(&f.call("Auth.whoami", vec![s(&b.token)]).unwrap()).unwrap();
    assert_eq!(who.subject, "HOD1");
}

#[test]
fn bad_credentials_do_not_reveal_which_part_is_wrong() {
    let f = Fixture::new();
    f.seed();
    assert_eq!(code(f.app.login("HOD1", "nope")), "bad-credentials");
    assert_eq!(code(f.app.login("NOBODY", "pw")), "bad-credentials");
    assert_eq!(code(f.call("Auth.login", vec![s("HOD1"), s("")])), "bad-credentials");
}

#[test]
fn applicant_account_activates_on_approval() {
    let f = Fixture::new();
    let admin = f.seed();
    let form = cis_domain::ApplicationForm {
        name: "Vika".into(),
        contact: cis_domain::ContactInfo::blank(),
        program: "BSC".into(),
        password: "secret".into(),
    };
    let app = cis_domain::Application::from_value(&f.call("Admissions.submit_application", vec![v(form)]).unwrap()).unwrap();
    assert_eq!(code(f.app.login(&app.id, "secret")), "account-inactive");
    assert_eq!(code(f.app.login(&app.id, "wrong")), "bad-credentials");

    let decided = f.call("Admissions.decide_application", vec![s(&admin), s(&app.id), v(Decision::Approve)]).unwrap();
    let sid = cis_domain::Application::from_value(&decided).unwrap().student_id.unwrap();
    let session = f.app.login(&sid, "secret").unwrap();
    assert_eq!((session.subject.as_str(), session.role), (sid.as_str(), Role::Student));
}

#[test]
fn empty_application_password_is_rejected() {
    let f = Fixture::new();
    f.seed();
    let form = cis_domain::ApplicationForm {
        name: "Vika".into(),
        contact: cis_domain::ContactInfo::blank(),
        program: "BSC".into(),
        password: String::new(),
    };
    assert_eq!(code(f.call("Admissions.submit_application", vec![v(form)])), "invalid-argument");
}

#[test]
fn token_states() {
    let f = Fixture::new();
    let t = f.admin();
    assert_eq!(code(f.call("Directory.list_units", vec![s("")])), "token-missing");
    assert_eq!(code(f.call("Directory.list_units", vec![s("feedface")])), "token-unknown");
    f.call("Directory.list_units", vec![s(&t)]).unwrap();
    f.advance(8 * 3600 - 1);
    f.call("Directory.list_units", vec![s(&t)]).unwrap();
    f.advance(1);
    assert_eq!(code(f.call("Directory.list_units", vec![s(&t)])), "token-expired");
    assert_eq!(code(f.call("Auth.whoami", vec![s(&t)])), "token-expired");
}

#[test]
fn logout_revokes_the_token() {
    let f = Fixture::new();
    let t = f.admin();
    assert_eq!(f.call("Auth.logout", vec![s(&t)]).unwrap(), Value::Bool(true));
    assert_eq!(code(f.call("Auth.whoami", vec![s(&t)])), "token-unknown");
    assert_eq!(code(f.call("Auth.logout", vec![s(&t)])), "token-unknown");
}

#[test]
fn system_info_needs_no_session() {
    let f = Fixture::new();
    let info = cis_domain::SystemInfo::from_value(&f.call("Auth.system_info", vec![]).unwrap()).unwrap();
    assert_eq!(info.current_term, f.app.policy().current_term);
    assert_eq!(info.fee_per_credit, f.app.policy().fee_per_credit);
}

#[test]
fn bootstrap_is_idempotent() {
    let f = Fixture::new();
    assert!(!f.app.bootstrap_admin(ADMIN.0, "other").unwrap());
    assert_eq!(code(f.app.login(ADMIN.0, "other")), "bad-credentials");
    f.admin();
}

#[test]
fn missing_arguments_are_bad_requests() {
    let f = Fixture::new();
    f.seed();
    let t = f.login("L1", "pw");
    let e = f.call("Enrollments.enroll", vec![s(&t)]).unwrap_err();
    assert!(matches!(e, AppError::BadArgument(_)), "{e:?}");
    assert_eq!(e.code(), "bad-request");
}

#[test]
fn every_app_error_code_is_in_the_error_table() {
    let errors = [
        AppError::TokenMissing,
        AppError::TokenUnknown,
        AppError::TokenExpired,
        AppError::BadCredentials,
        AppError::AccountInactive("x".into()),
        AppError::Forbidden { role: Role::Student, operation: "Reporting.report".into() },
        AppError::BadArgument("x".into()),
        AppError::Store(cis_store::StoreError::Closed),
        AppError::Domain(cis_domain::DomainError::CapacityFull("x".into())),
    ];
    for e in errors {
        let entry = cis_domain::contract::error_entry(e.code()).unwrap_or_else(|| panic!("{} missing", e.code()));
        let fault = cis_middleware::Fault::from(e);
        assert_eq!(fault.code, entry.code);
    }
}

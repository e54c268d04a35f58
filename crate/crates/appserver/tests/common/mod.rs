#![allow(dead_code)]

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use cis_appserver::{App, AppError};
use cis_domain::{contract, ContactInfo, Field, OfferingKey, OfferingRequest, Policy, Program, Role, Staff, Student, StudentStatus, Unit};
use cis_middleware::Value;
use cis_store::{Store, StoreOptions};
use tempfile::TempDir;

pub const TERM: &str = "2024-S1";
pub const ADMIN: (&str, &str) = ("ADM1", "admin-pw");

pub struct Fixture {
    pub dir: TempDir,
    pub app: Arc<App>,
    pub now: Arc<AtomicI64>,
}

pub fn v<T: Field>(x: T) -> Value {
    x.to_value()
}

pub fn s(x: &str) -> Value {
    Value::str(x)
}

pub fn key(unit: &str) -> OfferingKey {
    OfferingKey::new(unit, "Samabula", TERM)
}

pub fn staff(id: &str, role: Role) -> Staff {
    Staff { id: id.into(), name: format!("{id} name"), contact: ContactInfo::blank(), role, teaching_assignments: vec![] }
}

pub fn student(id: &str, program: &str) -> Student {
    Student {
        id: id.into(),
        name: format!("{id} name"),
        contact: ContactInfo::blank(),
        program: program.into(),
        major: None,
        status: StudentStatus::Admitted,
    }
}

impl Fixture {
    pub fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open_with(dir.path(), StoreOptions { sync: false }).unwrap();
        let now = Arc::new(AtomicI64::new(1_700_000_000));
        let clock = now.clone();
        let app = Arc::new(App::new(
            store,
            contract::doc(),
            Policy::default(),
            8,
            2,
            Arc::new(move || clock.load(Ordering::SeqCst)),
        ));
        app.bootstrap_admin(ADMIN.0, ADMIN.1).unwrap();
        Fixture { dir, app, now }
    }

    pub fn call(&self, op: &str, args: Vec<Value>) -> Result<Value, AppError> {
        self.app.call(op, &args)
    }

    pub fn login(&self, user: &str, pw: &str) -> String {
        self.app.login(user, pw).unwrap().token
    }

    pub fn admin(&self) -> String {
        self.login(ADMIN.0, ADMIN.1)
    }

    pub fn advance(&self, secs: i64) {
        self.now.fetch_add(secs, Ordering::SeqCst);
    }

    /// Units CS101 and CS201 (needs CS101), program BSC requiring both, head
    /// of department HOD1 and lecturer L1, all with password "pw".
    pub fn seed(&self) -> String {
        let t = self.admin();
        for u in [("CS101", vec![]), ("CS201", vec!["CS101".to_string()])] {
            let unit = Unit { code: u.0.into(), title: format!("{} title", u.0), credit_points: 15, prerequisites: u.1 };
            self.call("Directory.create_unit", vec![s(&t), v(unit)]).unwrap();
        }
        let p = Program {
            id: "BSC".into(),
            title: "Science".into(),
            required_units: vec!["CS101".into(), "CS201".into()],
            majors: vec![],
        };
        self.call("Directory.create_program", vec![s(&t), v(p)]).unwrap();
        self.call("Directory.create_staff", vec![s(&t), v(staff("HOD1", Role::HeadOfDepartment)), s("pw")]).unwrap();
        self.call("Directory.create_staff", vec![s(&t), v(staff("L1", Role::Lecturer)), s("pw")]).unwrap();
        t
    }

    pub fn add_student(&self, admin: &str, id: &str) -> String {
        self.call("Directory.create_student", vec![s(admin), v(student(id, "BSC")), s("pw")]).unwrap();
        self.login(id, "pw")
    }

    pub fn activate(&self, hod: &str, unit: &str, campus: &str, capacity: i32) {
        let req = OfferingRequest {
            unit: unit.into(),
            campus: campus.into(),
            term: TERM.into(),
            capacity,
            teacher: Some("L1".into()),
            timetable: vec![],
        };
        self.call("Enrollments.activate_offering", vec![s(hod), v(req)]).unwrap();
    }
}

pub fn code<T: std::fmt::Debug>(r: Result<T, AppError>) -> String {
    match r {
        Ok(v) => panic!("expected an error, got {v:?}"),
        Err(e) => e.code().to_string(),
    }
}

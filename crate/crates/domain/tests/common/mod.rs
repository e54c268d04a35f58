#![allow(dead_code)]

use cis_domain::directory::*;
use cis_domain::enrollment::activate_offering;
use cis_domain::*;

pub const TERM: &str = "2024-S1";
pub const CAMPUS: &str = "Samabula";

pub struct World {
    pub repo: MemRepo,
    pub policy: Policy,
    pub registrar: Actor,
    pub hod: Actor,
    pub dean: Actor,
    pub lecturer: Actor,
    pub tutor: Actor,
}

pub fn unit(code: &str, credits: i32, prereqs: &[&str]) -> Unit {
    Unit {
        code: code.into(),
        title: format!("{code} title"),
        credit_points: credits,
        prerequisites: prereqs.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn key(unit: &str) -> OfferingKey {
    OfferingKey::new(unit, CAMPUS, TERM)
}

pub fn student_actor(id: &str) -> Actor {
    Actor::new(id, Role::Student)
}

impl World {
    /// Units CS101 (15), CS102 (15), CS201 (20, needs CS101), MA101 (10);
    /// program BSC requires CS101, CS102, CS201 with major AI adding MA101;
    /// program BA requires MA101.
    pub fn new() -> World {
        let mut w = World {
            repo: MemRepo::new(),
            policy: Policy::default(),
            registrar: Actor::new("ADM1", Role::AcademicServices),
            hod: Actor::new("HOD1", Role::HeadOfDepartment),
            dean: Actor::new("DEAN1", Role::Dean),
            lecturer: Actor::new("L1", Role::Lecturer),
            tutor: Actor::new("T1", Role::Tutor),
        };
        let r = w.registrar.clone();
        for u in [unit("CS101", 15, &[]), unit("CS102", 15, &[]), unit("CS201", 20, &["CS101"]), unit("MA101", 10, &[])] {
            create_unit(&mut w.repo, &r, &u).unwrap();
        }
        create_program(
            &mut w.repo,
            &r,
            &Program {
                id: "BSC".into(),
                title: "Science".into(),
                required_units: vec!["CS101".into(), "CS102".into(), "CS201".into()],
                majors: vec![Major { name: "AI".into(), extra_units: vec!["MA101".into()] }],
            },
        )
        .unwrap();
        create_program(
            &mut w.repo,
            &r,
            &Program { id: "BA".into(), title: "Arts".into(), required_units: vec!["MA101".into()], majors: vec![] },
        )
        .unwrap();
        for a in [w.hod.clone(), w.dean.clone(), w.lecturer.clone(), w.tutor.clone(), r.clone()] {
            create_staff(
                &mut w.repo,
                &r,
                &Staff {
                    id: a.id.clone(),
                    name: format!("{} name", a.id),
                    contact: ContactInfo::blank(),
                    role: a.role,
                    teaching_assignments: vec![],
                },
            )
            .unwrap();
        }
        w
    }

    pub fn add_student(&mut self, id: &str, program: &str, major: Option<&str>) -> Actor {
        create_student(
            &mut self.repo,
            &self.registrar.clone(),
            &Student {
                id: id.into(),
                name: format!("{id} name"),
                contact: ContactInfo::blank(),
                program: program.into(),
                major: major.map(str::to_string),
                status: StudentStatus::Admitted,
            },
        )
        .unwrap();
        student_actor(id)
    }

    /// Activates `unit` at the default campus and term, taught by L1.
    pub fn activate(&mut self, unit: &str, capacity: i32, timetable: Vec<TimetableSlot>) -> Offering {
        let req = OfferingRequest {
            unit: unit.into(),
            campus: CAMPUS.into(),
            term: TERM.into(),
            capacity,
            teacher: Some(self.lecturer.id.clone()),
            timetable,
        };
        activate_offering(&mut self.repo, &self.policy, &self.hod.clone(), &req).unwrap()
    }
}

pub fn slot(kind: EntryKind, day: Weekday, start: &str, end: &str) -> TimetableSlot {
    TimetableSlot { kind, day, start: start.into(), end: end.into(), room: "R1".into() }
}

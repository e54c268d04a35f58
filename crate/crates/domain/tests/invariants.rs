//! Random operation sequences never break a domain invariant.
//!
//! Each operation runs against a copy of the state that is discarded on
//! error, the way the app server rolls back its transaction.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use cis_domain::admissions::*;
use cis_domain::enrollment::*;
use cis_domain::finance::*;
use cis_domain::records::*;
use cis_domain::*;
use common::*;
use proptest::prelude::*;

const STUDENTS: [&str; 3] = ["S1", "S2", "S3"];
const UNITS: [&str; 4] = ["CS101", "CS102", "CS201", "MA101"];
const LETTERS: [&str; 8] = ["A+", "A", "B+", "B", "C+", "C", "D", "E"];

#[derive(Debug, Clone)]
enum Op {
    Enroll { s: usize, u: usize, staff: bool },
    Withdraw { s: usize, u: usize, staff: bool },
    Grade { s: usize, u: usize, g: usize },
    Coursework { u: usize, name: usize, weight: i32, scored: Vec<usize> },
    Pay { s: usize, amount: i64, decline: bool },
    ApplyGraduation { s: usize },
    DecideGraduation { n: usize, approve: bool },
    RequestChange { s: usize, to_ba: bool },
    DecideChange { n: usize, approve: bool },
    Apply,
    DecideApplication { n: usize, approve: bool },
}

fn op() -> impl Strategy<Value = Op> {
    let s = 0..STUDENTS.len();
    let u = 0..UNITS.len();
    prop_oneof![
        4 => (s.clone(), u.clone(), any::<bool>()).prop_map(|(s, u, staff)| Op::Enroll { s, u, staff }),
        1 => (s.clone(), u.clone(), any::<bool>()).prop_map(|(s, u, staff)| Op::Withdraw { s, u, staff }),
        2 => (s.clone(), u.clone(), 0..LETTERS.len()).prop_map(|(s, u, g)| Op::Grade { s, u, g }),
        2 => (u, 0..3usize, 0..=60i32, proptest::collection::vec(0..STUDENTS.len(), 0..3))
            .prop_map(|(u, name, weight, scored)| Op::Coursework { u, name, weight, scored }),
        2 => (s.clone(), 1..1500i64, proptest::bool::weighted(0.2)).prop_map(|(s, amount, decline)| Op::Pay { s, amount, decline }),
        1 => s.clone().prop_map(|s| Op::ApplyGraduation { s }),
        1 => (0..4usize, any::<bool>()).prop_map(|(n, approve)| Op::DecideGraduation { n, approve }),
        1 => (s, any::<bool>()).prop_map(|(s, to_ba)| Op::RequestChange { s, to_ba }),
        1 => (0..4usize, any::<bool>()).prop_map(|(n, approve)| Op::DecideChange { n, approve }),
        1 => Just(Op::Apply),
        1 => (0..4usize, any::<bool>()).prop_map(|(n, approve)| Op::DecideApplication { n, approve }),
    ]
}

fn world() -> World {
    let mut w = World::new();
    for s in STUDENTS {
        w.add_student(s, "BSC", None);
    }
    for (u, cap) in UNITS.iter().zip([2, 1, 1, 3]) {
        w.activate(u, cap, vec![]);
    }
    w
}

fn apply(w: &mut World, op: &Op, decided: &mut BTreeMap<String, RequestStatus>) -> Result<(), TestCaseError> {
    let policy = w.policy.clone();
    let lecturer = w.lecturer.clone();
    let dean = w.dean.clone();
    let mut scratch = w.repo.clone();
    let repo = &mut scratch;
    let decision = |approve: bool| if approve { Decision::Approve } else { Decision::Reject };
    let result: DomainResult<()> = match op {
        Op::Enroll { s, u, staff } => {
            let sid = STUDENTS[*s];
            let actor = if *staff { lecturer.clone() } else { student_actor(sid) };
            let passed_before = passed_units(repo, &policy, sid).unwrap();
            enroll(repo, &policy, &actor, sid, &key(UNITS[*u])).map(|e| {
                if e.override_by.is_none() {
                    let unit = load::<Unit>(repo, UNITS[*u]).unwrap().unwrap();
                    assert!(
                        unit.prerequisites.iter().all(|p| passed_before.contains(p)),
                        "{sid} enrolled in {} without prerequisites",
                        unit.code
                    );
                }
            })
        }
        Op::Withdraw { s, u, staff } => {
            let sid = STUDENTS[*s];
            let actor = if *staff { lecturer.clone() } else { student_actor(sid) };
            withdraw(repo, &policy, &actor, sid, &key(UNITS[*u])).map(drop)
        }
        Op::Grade { s, u, g } => {
            let entry = GradeEntry { student: STUDENTS[*s].into(), grade: LETTERS[*g].into() };
            finalize_grades(repo, &policy, &lecturer, &key(UNITS[*u]), &[entry]).map(drop)
        }
        Op::Coursework { u, name, weight, scored } => {
            let ids: BTreeSet<usize> = scored.iter().copied().collect();
            let item = CourseworkItem {
                offering: key(UNITS[*u]),
                assessment_name: format!("Task{name}"),
                weight: *weight,
                scores: ids.iter().map(|i| Score { student: STUDENTS[*i].into(), score: 50 }).collect(),
            };
            submit_coursework(repo, &lecturer, &item).map(drop)
        }
        Op::Pay { s, amount, decline } => {
            let sid = STUDENTS[*s];
            let card = if *decline { "4000-0000" } else { "4000-1234" };
            pay_invoice(repo, &policy, &student_actor(sid), &invoice_id(sid, TERM), *amount, card, 0).map(drop)
        }
        Op::ApplyGraduation { s } => apply_graduation(repo, &policy, &student_actor(STUDENTS[*s])).map(drop),
        Op::DecideGraduation { n, approve } => {
            let id = format!("GRD{:04}", n + 1);
            decide_graduation(repo, &policy, &dean, &id, decision(*approve)).map(|g| {
                assert!(decided.insert(id, g.status).is_none(), "graduation decided twice");
            })
        }
        Op::RequestChange { s, to_ba } => {
            let p = if *to_ba { "BA" } else { "BSC" };
            request_program_change(repo, &student_actor(STUDENTS[*s]), p, None).map(drop)
        }
        Op::DecideChange { n, approve } => {
            let id = format!("PCR{:04}", n + 1);
            decide_program_change(repo, &dean, &id, decision(*approve)).map(|r| {
                assert!(decided.insert(id, r.status).is_none(), "program change decided twice");
            })
        }
        Op::Apply => submit_application(
            repo,
            &policy,
            &ApplicationForm { name: "New".into(), contact: ContactInfo::blank(), program: "BA".into(), password: "pw".into() },
        )
        .map(drop),
        Op::DecideApplication { n, approve } => {
            let id = format!("APP{:04}", n + 1);
            decide_application(repo, &dean, &id, decision(*approve)).map(|a| {
                assert!(decided.insert(id, a.status).is_none(), "application decided twice");
            })
        }
    };
    match result {
        Ok(()) => w.repo = scratch,
        Err(DomainError::AlreadyDecided(id)) => {
            prop_assert!(decided.contains_key(&id), "{id} reported decided but never was");
        }
        Err(DomainError::Storage(m)) => return Err(TestCaseError::fail(m)),
        Err(_) => {}
    }
    // Decided requests keep the status they were decided with.
    for (id, status) in decided.iter() {
        let now = if id.starts_with("GRD") {
            load::<GraduationApplication>(&w.repo, id).unwrap().map(|g| g.status)
        } else if id.starts_with("PCR") {
            load::<ProgramChangeRequest>(&w.repo, id).unwrap().map(|r| r.status)
        } else {
            load::<Application>(&w.repo, id).unwrap().map(|a| a.status)
        };
        prop_assert_eq!(now, Some(*status));
    }
    let violations = audit::audit(&w.repo, &w.policy).unwrap();
    prop_assert!(violations.is_empty(), "after {:?}: {:?}", op, violations);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn invariants_hold_over_random_operations(ops in proptest::collection::vec(op(), 1..80)) {
        let mut w = world();
        let mut decided = BTreeMap::new();
        for op in &ops {
            apply(&mut w, op, &mut decided)?;
        }
        for o in scan::<Offering>(&w.repo, "").unwrap() {
            let held = offering_enrollments(&w.repo, &o.key()).unwrap()
                .iter().filter(|e| e.status == EnrollmentStatus::Enrolled).count();
            prop_assert!(held as i32 <= o.capacity);
        }
    }

    #[test]
    fn decisions_happen_once(decisions in proptest::collection::vec((0..3usize, any::<bool>()), 1..30)) {
        let mut w = world();
        let dean = w.dean.clone();
        let l = w.lecturer.clone();
        enroll(&mut w.repo, &w.policy, &l, "S1", &key("MA101")).unwrap();
        let s1 = student_actor("S1");
        let app = submit_application(&mut w.repo, &w.policy, &ApplicationForm {
            name: "N".into(), contact: ContactInfo::blank(), program: "BA".into(), password: "p".into(),
        }).unwrap();
        let grd = apply_graduation(&mut w.repo, &w.policy, &s1).unwrap();
        let pcr = request_program_change(&mut w.repo, &s1, "BA", None).unwrap();
        let mut first: [Option<RequestStatus>; 3] = [None; 3];
        for (which, approve) in decisions {
            let d = if approve { Decision::Approve } else { Decision::Reject };
            let mut scratch = w.repo.clone();
            let r = match which {
                0 => decide_application(&mut scratch, &dean, &app.id, d).map(|a| a.status),
                1 => decide_graduation(&mut scratch, &w.policy, &dean, &grd.id, d).map(|g| g.status),
                _ => decide_program_change(&mut scratch, &dean, &pcr.id, d).map(|r| r.status),
            };
            match (first[which], r) {
                (None, Ok(s)) => { first[which] = Some(s); w.repo = scratch; }
                (None, Err(DomainError::NotEligible(_))) => prop_assert!(approve && which == 1),
                (Some(_), Err(DomainError::AlreadyDecided(_))) => {}
                (prev, other) => prop_assert!(false, "{which}: prev {prev:?}, got {other:?}"),
            }
        }
    }
}

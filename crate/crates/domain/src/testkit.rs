//! Brute-force oracles for eligibility, requirements and GPA over randomly
//! generated small catalogs.

use std::collections::{BTreeMap, BTreeSet};

use crate::records::{academic_history, graduation_eligibility, program_requirements};
use crate::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: [(&str, i64, bool); 8] = [
    ("A+", 450, true),
    ("A", 400, true),
    ("B+", 350, true),
    ("B", 300, true),
    ("C+", 250, true),
    ("C", 200, true),
    ("D", 100, false),
    ("E", 0, false),
];

struct Attempt {
    unit: usize,
    term: &'static str,
    status: EnrollmentStatus,
    grade: Option<&'static str>,
}

struct Catalog {
    credits: Vec<i32>,
    required: Vec<usize>,
    major_extra: Option<Vec<usize>>,
    students: Vec<(bool, Vec<Attempt>)>,
}

fn code(i: usize) -> String {
    format!("U{i}")
}

fn subset(rng: &mut ChaCha8Rng, n: usize, nonempty: bool) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if !nonempty || !s.is_empty() {
            return s;
        }
    }
}

fn generate(rng: &mut ChaCha8Rng) -> Catalog {
    let n = rng.gen_range(1..=6);
    let credits = (0..n).map(|_| *[5, 10, 15, 20, 30].choose(rng).unwrap()).collect();
    let required = subset(rng, n, true);
    let major_extra = rng.gen_bool(0.5).then(|| subset(rng, n, false));
    let students = (0..rng.gen_range(1..=4))
        .map(|_| {
            let has_major = major_extra.is_some() && rng.gen_bool(0.6);
            let mut attempts = Vec::new();
            for u in 0..n {
                for term in ["2023-S1", "2023-S2", "2024-S1"] {
                    if !rng.gen_bool(0.35) {
                        continue;
                    }
                    let (status, grade) = match rng.gen_range(0..4) {
                        0 => (EnrollmentStatus::Enrolled, None),
                        1 => (EnrollmentStatus::Withdrawn, None),
                        _ => (EnrollmentStatus::Completed, Some(LETTERS.choose(rng).unwrap().0)),
                    };
                    attempts.push(Attempt { unit: u, term, status, grade });
                }
            }
            (has_major, attempts)
        })
        .collect();
    Catalog { credits, required, major_extra, students }
}

fn load_into_repo(c: &Catalog) -> MemRepo {
    let mut repo = MemRepo::new();
    for (i, cr) in c.credits.iter().enumerate() {
        save(&mut repo, &Unit { code: code(i), title: format!("Unit {i}"), prerequisites: vec![], credit_points: *cr }).unwrap();
        for term in ["2023-S1", "2023-S2", "2024-S1"] {
            save(
                &mut repo,
                &Offering { unit: code(i), campus: "Main".into(), term: term.into(), capacity: 100, active: true, teacher: None },
            )
            .unwrap();
        }
    }
    let majors = c
        .major_extra
        .iter()
        .map(|m| Major { name: "M".into(), extra_units: m.iter().map(|u| code(*u)).collect() })
        .collect();
    save(
        &mut repo,
        &Program { id: "P".into(), title: "Program".into(), required_units: c.required.iter().map(|u| code(*u)).collect(), majors },
    )
    .unwrap();
    for (si, (has_major, attempts)) in c.students.iter().enumerate() {
        let id = format!("S{si}");
        save(
            &mut repo,
            &Student {
                id: id.clone(),
                name: id.clone(),
                contact: ContactInfo::blank(),
                program: "P".into(),
                major: has_major.then(|| "M".to_string()),
                status: StudentStatus::Active,
            },
        )
        .unwrap();
        for a in attempts {
            let offering = OfferingKey::new(code(a.unit), "Main", a.term);
            save(
                &mut repo,
                &Enrollment {
                    student: id.clone(),
                    offering: offering.clone(),
                    status: a.status,
                    override_by: None,
                    final_grade: a.grade.map(str::to_string),
                },
            )
            .unwrap();
            save(&mut repo, &EnrollmentRef { student: id.clone(), offering }).unwrap();
        }
    }
    repo
}

fn letter(g: &str) -> (i64, bool) {
    let (_, p, pass) = LETTERS.iter().find(|(l, _, _)| *l == g).unwrap();
    (*p, *pass)
}

#[derive(Debug, Default)]
pub struct CatalogReport {
    pub catalogs: usize,
    pub students_checked: usize,
    pub mismatches: Vec<String>,
}

/// Generates `rounds` catalogs of at most 6 units and 4 students and
/// compares the domain's answers with set arithmetic over the fixture.
pub fn catalog_oracle(seed: u64, rounds: usize) -> CatalogReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let policy = Policy::default();
    let staff = Actor::new("X", Role::Lecturer);
    let mut report = CatalogReport::default();
    for round in 0..rounds {
        let c = generate(&mut rng);
        let repo = load_into_repo(&c);
        report.catalogs += 1;
        for (si, (has_major, attempts)) in c.students.iter().enumerate() {
            let id = format!("S{si}");
            report.students_checked += 1;
            if let Err(m) = check_student(&repo, &policy, &staff, &c, &id, *has_major, attempts) {
                report.mismatches.push(format!("round {round} student {id}: {m}"));
            }
        }
    }
    report
}

fn check_student(
    repo: &MemRepo,
    policy: &Policy,
    staff: &Actor,
    c: &Catalog,
    id: &str,
    has_major: bool,
    attempts: &[Attempt],
) -> Result<(), String> {
    let mut needed: BTreeSet<String> = c.required.iter().map(|u| code(*u)).collect();
    if has_major {
        needed.extend(c.major_extra.as_ref().unwrap().iter().map(|u| code(*u)));
    }
    let mut passed = BTreeSet::new();
    for a in attempts {
        if a.status == EnrollmentStatus::Completed && letter(a.grade.unwrap()).1 {
            passed.insert(code(a.unit));
        }
    }
    let missing: BTreeSet<String> = needed.difference(&passed).cloned().collect();

    let el = graduation_eligibility(repo, policy, staff, id).map_err(|e| e.to_string())?;
    let got: BTreeSet<String> = el.missing.iter().cloned().collect();
    if got.len() != el.missing.len() || got != missing || el.eligible != missing.is_empty() {
        return Err(format!("eligibility {el:?}, expected missing {missing:?}"));
    }

    let reqs = program_requirements(repo, policy, staff, id).map_err(|e| e.to_string())?;
    let got: BTreeMap<String, bool> = reqs.iter().map(|r| (r.unit.clone(), r.completed)).collect();
    let want: BTreeMap<String, bool> = needed.iter().map(|u| (u.clone(), passed.contains(u))).collect();
    if got.len() != reqs.len() || got != want {
        return Err(format!("requirements {got:?}, expected {want:?}"));
    }

    let (mut w, mut cr) = (0i64, 0i64);
    let completed = attempts.iter().filter(|a| a.status == EnrollmentStatus::Completed);
    for a in completed.clone() {
        w += letter(a.grade.unwrap()).0 * c.credits[a.unit] as i64;
        cr += c.credits[a.unit] as i64;
    }
    let h = academic_history(repo, policy, staff, id).map_err(|e| e.to_string())?;
    if h.rows.len() != completed.count() {
        return Err(format!("history has {} rows", h.rows.len()));
    }
    match (&h.gpa, cr) {
        (None, 0) => Ok(()),
        (Some(Rational { num, den }), cr) if cr > 0 => {
            // num/den must equal w / (100 * cr)
            if *num as i128 * 100 * cr as i128 != *den as i128 * w as i128 {
                return Err(format!("gpa {num}/{den}, expected {w}/{}", 100 * cr));
            }
            let hundredths = (2 * w + cr) / (2 * cr);
            let text = format!("{}.{:02}", hundredths / 100, hundredths % 100);
            if h.gpa_text.as_deref() != Some(text.as_str()) {
                return Err(format!("gpa text {:?}, expected {text}", h.gpa_text));
            }
            Ok(())
        }
        (g, _) => Err(format!("gpa {g:?} with {cr} completed credits")),
    }
}

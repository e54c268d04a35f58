//! Offline check of every domain invariant over a complete state.

use std::collections::{BTreeMap, BTreeSet};

use crate::*;

/// Recomputes the invariants from scratch and describes each violation.
pub fn audit(repo: &dyn Repo, policy: &Policy) -> DomainResult<Vec<String>> {
    let mut v = Vec::new();
    let offerings = scan::<Offering>(repo, "")?;
    let enrollments = scan::<Enrollment>(repo, "")?;
    let refs = scan::<EnrollmentRef>(repo, "")?;

    let mut by_offering: BTreeMap<OfferingKey, Vec<&Enrollment>> = BTreeMap::new();
    for e in &enrollments {
        by_offering.entry(e.offering.clone()).or_default().push(e);
    }
    for o in &offerings {
        let held = by_offering
            .get(&o.key())
            .map_or(0, |es| es.iter().filter(|e| e.status != EnrollmentStatus::Withdrawn).count());
        if held as i64 > o.capacity as i64 {
            v.push(format!("offering {} holds {held} seats over capacity {}", o.key(), o.capacity));
        }
    }

    let mut active_per_unit_term: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for e in &enrollments {
        if !offerings.iter().any(|o| o.key() == e.offering) {
            v.push(format!("enrollment {}/{} has no offering", e.offering, e.student));
        }
        if (e.status == EnrollmentStatus::Completed) != e.final_grade.is_some() {
            v.push(format!("enrollment {}/{} is {} with grade {:?}", e.offering, e.student, e.status, e.final_grade));
        }
        if let Some(g) = &e.final_grade {
            if policy.grades.get(g).is_none() {
                v.push(format!("enrollment {}/{} has unknown grade {g}", e.offering, e.student));
            }
        }
        if e.status != EnrollmentStatus::Withdrawn {
            *active_per_unit_term
                .entry((e.student.clone(), e.offering.unit.clone(), e.offering.term.clone()))
                .or_default() += 1;
        }
    }
    for ((s, u, t), n) in active_per_unit_term {
        if n > 1 {
            v.push(format!("student {s} holds {n} enrollments in {u} for {t}"));
        }
    }
    let ref_set: BTreeSet<(String, OfferingKey)> = refs.iter().map(|r| (r.student.clone(), r.offering.clone())).collect();
    let enr_set: BTreeSet<(String, OfferingKey)> = enrollments.iter().map(|e| (e.student.clone(), e.offering.clone())).collect();
    if ref_set != enr_set {
        v.push(format!(
            "enrollment index out of step: {} index entries, {} enrollments",
            ref_set.len(),
            enr_set.len()
        ));
    }

    let mut weights: BTreeMap<OfferingKey, i32> = BTreeMap::new();
    for c in scan::<CourseworkItem>(repo, "")? {
        *weights.entry(c.offering.clone()).or_default() += c.weight;
        for s in &c.scores {
            if !enr_set.contains(&(s.student.clone(), c.offering.clone())) {
                v.push(format!("coursework {}/{} scores non-member {}", c.offering, c.assessment_name, s.student));
            }
        }
    }
    for (k, w) in weights {
        if w > 100 {
            v.push(format!("coursework weights for {k} total {w}"));
        }
    }

    for inv in scan::<Invoice>(repo, "")? {
        let lines: i64 = inv.lines.iter().map(|l| l.amount).sum();
        if lines != inv.total {
            v.push(format!("invoice {} total {} but lines sum to {lines}", inv.id, inv.total));
        }
        let paid: i64 = finance::payments(repo, &inv.id)?.iter().map(|p| p.amount).sum();
        if paid != inv.paid {
            v.push(format!("invoice {} paid {} but payments sum to {paid}", inv.id, inv.paid));
        }
        if inv.paid < 0 || inv.paid > inv.total.max(0) {
            v.push(format!("invoice {} paid {} outside 0..={}", inv.id, inv.paid, inv.total));
        }
    }

    let grads = scan::<GraduationApplication>(repo, "")?;
    for s in scan::<Student>(repo, "")? {
        if s.status == StudentStatus::Graduated
            && !grads.iter().any(|g| g.student == s.id && g.status == RequestStatus::Approved && g.eligibility_snapshot)
        {
            v.push(format!("student {} graduated without an approved eligible application", s.id));
        }
    }
    let decided = |what: &str, id: &str, status: RequestStatus, by: &Option<String>, v: &mut Vec<String>| {
        if (status == RequestStatus::Pending) == by.is_some() {
            v.push(format!("{what} {id} is {status} with decided_by {by:?}"));
        }
    };
    for g in &grads {
        decided("graduation", &g.id, g.status, &g.decided_by, &mut v);
        if g.status == RequestStatus::Approved && !g.eligibility_snapshot {
            v.push(format!("graduation {} approved while ineligible", g.id));
        }
    }
    for a in scan::<Application>(repo, "")? {
        decided("application", &a.id, a.status, &a.decided_by, &mut v);
        if (a.status == RequestStatus::Approved) != a.student_id.is_some() {
            v.push(format!("application {} is {} with student {:?}", a.id, a.status, a.student_id));
        }
    }
    for r in scan::<ProgramChangeRequest>(repo, "")? {
        decided("program change", &r.id, r.status, &r.decided_by, &mut v);
    }
    Ok(v)
}

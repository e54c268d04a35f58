//! Statistical reports for administration staff.

use std::collections::BTreeMap;

use crate::*;

/// Formats `num/den` with up to three decimals, trailing zeros dropped.
pub fn format_rate(num: i64, den: i64) -> String {
    let thousandths = (num * 2000 + den) / (den * 2);
    let s = format!("{}.{:03}", thousandths / 1000, thousandths % 1000);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn report(repo: &dyn Repo, policy: &Policy, actor: &Actor, kind: ReportKind, term: &str) -> DomainResult<ReportTable> {
    require_admin(actor, "reports")?;
    check_term(term)?;
    let offerings: Vec<Offering> = scan::<Offering>(repo, "")?.into_iter().filter(|o| o.term == term).collect();
    let (columns, rows): (&[&str], Vec<Vec<String>>) = match kind {
        ReportKind::EnrollmentCounts => {
            let mut rows = Vec::new();
            for o in &offerings {
                let n = offering_enrollments(repo, &o.key())?
                    .iter()
                    .filter(|e| e.status != EnrollmentStatus::Withdrawn)
                    .count();
                rows.push(vec![o.unit.clone(), o.campus.clone(), n.to_string()]);
            }
            (&["unit", "campus", "count"], rows)
        }
        ReportKind::PassRates => {
            let mut per_unit: BTreeMap<String, (i64, i64)> = BTreeMap::new();
            for o in &offerings {
                let tally = per_unit.entry(o.unit.clone()).or_default();
                for e in offering_enrollments(repo, &o.key())? {
                    if e.status == EnrollmentStatus::Completed {
                        tally.1 += 1;
                        if e.final_grade.as_deref().is_some_and(|g| policy.grades.is_passing(g)) {
                            tally.0 += 1;
                        }
                    }
                }
            }
            let rows = per_unit
                .into_iter()
                .map(|(unit, (passed, completed))| {
                    let rate = if completed == 0 { "-".to_string() } else { format_rate(passed, completed) };
                    vec![unit, passed.to_string(), completed.to_string(), rate]
                })
                .collect();
            (&["unit", "passed", "completed", "pass_rate"], rows)
        }
        ReportKind::ApplicationFunnel => {
            let mut counts = [0usize; 3];
            for a in scan::<Application>(repo, "")? {
                if a.term == term {
                    counts[a.status.index() as usize] += 1;
                }
            }
            (&["pending", "approved", "rejected"], vec![counts.iter().map(|c| c.to_string()).collect()])
        }
    };
    Ok(ReportTable {
        kind,
        term: term.to_string(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
    })
}

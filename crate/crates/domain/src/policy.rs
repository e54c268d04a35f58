use crate::error::{invalid, DomainResult};

/// One letter grade and its points, in tenths (A = 40).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeDef {
    pub letter: String,
    pub points_tenths: i64,
    pub passing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradeScale {
    pub grades: Vec<GradeDef>,
}

impl Default for GradeScale {
    fn default() -> Self {
        let g = |letter: &str, points_tenths, passing| GradeDef { letter: letter.into(), points_tenths, passing };
        GradeScale {
            grades: vec![
                g("A+", 45, true),
                g("A", 40, true),
                g("B+", 35, true),
                g("B", 30, true),
                g("C+", 25, true),
                g("C", 20, true),
                g("D", 10, false),
                g("E", 0, false),
            ],
        }
    }
}

impl GradeScale {
    pub fn get(&self, letter: &str) -> Option<&GradeDef> {
        self.grades.iter().find(|g| g.letter == letter)
    }

    pub fn check(&self, letter: &str) -> DomainResult<&GradeDef> {
        self.get(letter).ok_or_else(|| invalid(format!("unknown grade `{letter}`")))
    }

    pub fn is_passing(&self, letter: &str) -> bool {
        self.get(letter).is_some_and(|g| g.passing)
    }

    /// Parses `A+=45:pass,A=40:pass,...,E=0:fail`.
    pub fn parse(text: &str) -> Result<GradeScale, String> {
        let mut grades = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (letter, rest) = item.split_once('=').ok_or_else(|| format!("grade `{item}` lacks `=`"))?;
            let (points, pass) = rest.split_once(':').ok_or_else(|| format!("grade `{item}` lacks `:pass|fail`"))?;
            let points_tenths = points.trim().parse().map_err(|_| format!("bad points in `{item}`"))?;
            let passing = match pass.trim() {
                "pass" => true,
                "fail" => false,
                other => return Err(format!("expected pass or fail, got `{other}`")),
            };
            grades.push(GradeDef { letter: letter.trim().to_string(), points_tenths, passing });
        }
        if grades.is_empty() {
            return Err("empty grade table".into());
        }
        Ok(GradeScale { grades })
    }

    /// The text [`GradeScale::parse`] reads.
    pub fn render(&self) -> String {
        self.grades
            .iter()
            .map(|g| format!("{}={}:{}", g.letter, g.points_tenths, if g.passing { "pass" } else { "fail" }))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Institution-wide settings the rules depend on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub current_term: String,
    pub fee_per_credit: i64,
    pub grades: GradeScale,
    /// Simulated card gateway declines references ending with this text.
    pub decline_suffix: String,
    pub default_capacity: i32,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            current_term: "2024-S1".into(),
            fee_per_credit: 40,
            grades: GradeScale::default(),
            decline_suffix: "0000".into(),
            default_capacity: 100,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_inverts_parse() {
        let s = GradeScale::default();
        assert_eq!(s.render(), "A+=45:pass,A=40:pass,B+=35:pass,B=30:pass,C+=25:pass,C=20:pass,D=10:fail,E=0:fail");
        assert_eq!(GradeScale::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn default_scale_passing_rule() {
        let s = GradeScale::default();
        for l in ["A+", "A", "B+", "B", "C+", "C"] {
            assert!(s.is_passing(l), "{l}");
        }
        for l in ["D", "E", "F", ""] {
            assert!(!s.is_passing(l), "{l}");
        }
        assert_eq!(s.get("A+").unwrap().points_tenths, 45);
    }

    #[test]
    fn parse_scale() {
        let s = GradeScale::parse("HD=50:pass, P=20:pass, F=0:fail").unwrap();
        assert_eq!(s.grades.len(), 3);
        assert!(s.is_passing("P") && !s.is_passing("F"));
        assert!(GradeScale::parse("A=x:pass").is_err());
        assert!(GradeScale::parse("").is_err());
    }
}

//! Entities and their mapping onto contract values.
//!
//! Every struct here mirrors a record of the same name in
//! `contract/fnucis.idl`, field for field; every enum mirrors an IDL enum
//! case for case. `tests::model_matches_contract` keeps the two in step.

use std::fmt;
use std::str::FromStr;

use cis_middleware::{Value, ValueError};

/// Conversion between a Rust field type and a contract value.
pub trait Field: Sized {
    fn to_value(&self) -> Value;
    fn from_value(v: &Value) -> Result<Self, ValueError>;
}

impl Field for String {
    fn to_value(&self) -> Value {
        Value::Str(self.clone())
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        Ok(v.as_str()?.to_string())
    }
}

impl Field for i32 {
    fn to_value(&self) -> Value {
        Value::I32(*self)
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        v.as_i32()
    }
}

impl Field for i64 {
    fn to_value(&self) -> Value {
        Value::I64(*self)
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        v.as_i64()
    }
}

impl Field for bool {
    fn to_value(&self) -> Value {
        Value::Bool(*self)
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        v.as_bool()
    }
}

impl Field for Vec<u8> {
    fn to_value(&self) -> Value {
        Value::Bytes(self.clone())
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        Ok(v.as_bytes()?.to_vec())
    }
}

impl<T: Field> Field for Option<T> {
    fn to_value(&self) -> Value {
        Value::opt(self.as_ref().map(Field::to_value))
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        v.as_opt()?.map(T::from_value).transpose()
    }
}

/// Lists. `Vec<u8>` is taken by `bytes`, so lists use this wrapper-free
/// impl for every element type that is not `u8`.
pub trait ListElem: Field {}

impl<T: ListElem> Field for Vec<T> {
    fn to_value(&self) -> Value {
        Value::list(self.iter().map(Field::to_value))
    }
    fn from_value(v: &Value) -> Result<Self, ValueError> {
        v.as_list()?.iter().map(T::from_value).collect()
    }
}

impl ListElem for String {}
impl ListElem for i32 {}
impl ListElem for i64 {}
impl ListElem for bool {}
impl<T: ListElem> ListElem for Vec<T> {}

macro_rules! record {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq)]
        pub struct $name {
            $($(#[$fm])* pub $field: $ty,)*
        }

        impl Field for $name {
            fn to_value(&self) -> Value {
                Value::record([$((stringify!($field), Field::to_value(&self.$field))),*])
            }
            #[allow(unused_variables)]
            fn from_value(v: &Value) -> Result<Self, ValueError> {
                v.as_record()?;
                Ok($name {
                    $($field: Field::from_value(v.field(stringify!($field))?)
                        .map_err(|e| nest(stringify!($field), e))?,)*
                })
            }
        }

        impl ListElem for $name {}

        impl $name {
            pub const RECORD: &'static str = stringify!($name);
        }
    };
}

macro_rules! enumeration {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $wire:literal),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),* }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),*];
            pub const ENUM: &'static str = stringify!($name);

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $wire),* }
            }

            pub fn index(self) -> u32 {
                Self::ALL.iter().position(|v| *v == self).expect("listed") as u32
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::ALL.iter().copied().find(|v| v.as_str() == s)
                    .ok_or_else(|| format!("unknown {} `{s}`", stringify!($name)))
            }
        }

        impl Field for $name {
            fn to_value(&self) -> Value {
                Value::Enum(self.index())
            }
            fn from_value(v: &Value) -> Result<Self, ValueError> {
                let i = v.as_enum()?;
                Self::ALL.get(i as usize).copied().ok_or_else(|| ValueError::Invalid {
                    field: stringify!($name).to_string(),
                    reason: format!("case index {i} out of range"),
                })
            }
        }

        impl ListElem for $name {}
    };
}

fn nest(field: &str, e: ValueError) -> ValueError {
    match e {
        ValueError::MissingField(f) => ValueError::MissingField(format!("{field}.{f}")),
        ValueError::Invalid { field: inner, reason } => ValueError::Invalid { field: format!("{field}.{inner}"), reason },
        ValueError::WrongKind { expected, found } => ValueError::Invalid {
            field: field.to_string(),
            reason: format!("expected {expected}, found {found}"),
        },
    }
}

enumeration!(Role {
    Student = "student",
    Tutor = "tutor",
    AssistantLecturer = "assistant_lecturer",
    Lecturer = "lecturer",
    SeniorLecturer = "senior_lecturer",
    Professor = "professor",
    Dean = "dean",
    HeadOfDepartment = "head_of_department",
    AcademicServices = "academic_services",
});

impl Role {
    pub fn is_student(self) -> bool {
        self == Role::Student
    }

    pub fn is_academic(self) -> bool {
        matches!(
            self,
            Role::Tutor | Role::AssistantLecturer | Role::Lecturer | Role::SeniorLecturer | Role::Professor
        )
    }

    pub fn is_admin(self) -> bool {
        matches!(self, Role::Dean | Role::HeadOfDepartment | Role::AcademicServices)
    }

    pub fn is_staff(self) -> bool {
        self.is_academic() || self.is_admin()
    }
}

enumeration!(StudentStatus {
    Applicant = "applicant",
    Admitted = "admitted",
    Active = "active",
    Graduated = "graduated",
    Withdrawn = "withdrawn",
});

enumeration!(EnrollmentStatus { Enrolled = "enrolled", Withdrawn = "withdrawn", Completed = "completed" });
enumeration!(RequestStatus { Pending = "pending", Approved = "approved", Rejected = "rejected" });
enumeration!(Decision { Approve = "approve", Reject = "reject" });
enumeration!(EntryKind { Class = "class", FinalExam = "final_exam" });
enumeration!(Weekday { Mon = "mon", Tue = "tue", Wed = "wed", Thu = "thu", Fri = "fri", Sat = "sat", Sun = "sun" });
enumeration!(ReportKind {
    EnrollmentCounts = "enrollment_counts",
    PassRates = "pass_rates",
    ApplicationFunnel = "application_funnel",
});

record!(ContactInfo {
    postal_address: String,
    residential_address: String,
    home_phone: String,
    mobile_phone: String,
});

impl ContactInfo {
    pub fn blank() -> Self {
        ContactInfo {
            postal_address: String::new(),
            residential_address: String::new(),
            home_phone: String::new(),
            mobile_phone: String::new(),
        }
    }
}

record!(Student {
    id: String,
    name: String,
    contact: ContactInfo,
    program: String,
    major: Option<String>,
    status: StudentStatus,
});

record!(TeachingAssignment { unit: String, term: String, campus: String });

record!(Staff {
    id: String,
    name: String,
    contact: ContactInfo,
    role: Role,
    teaching_assignments: Vec<TeachingAssignment>,
});

record!(Major { name: String, extra_units: Vec<String> });

record!(Program {
    id: String,
    title: String,
    required_units: Vec<String>,
    majors: Vec<Major>,
});

record!(Unit {
    code: String,
    title: String,
    prerequisites: Vec<String>,
    credit_points: i32,
});

record!(
    #[derive(Hash, PartialOrd, Ord)]
    OfferingKey { unit: String, campus: String, term: String }
);

impl OfferingKey {
    pub fn new(unit: impl Into<String>, campus: impl Into<String>, term: impl Into<String>) -> Self {
        OfferingKey { unit: unit.into(), campus: campus.into(), term: term.into() }
    }
}

/// Rendered as `UNIT:CAMPUS:TERM`.
impl fmt::Display for OfferingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.unit, self.campus, self.term)
    }
}

impl FromStr for OfferingKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [u, c, t] if !u.is_empty() && !c.is_empty() && !t.is_empty() => {
                t.parse::<Term>()?;
                Ok(OfferingKey::new(*u, *c, *t))
            }
            _ => Err(format!("offering key `{s}` is not UNIT:CAMPUS:TERM")),
        }
    }
}

record!(Offering {
    unit: String,
    campus: String,
    term: String,
    capacity: i32,
    active: bool,
    teacher: Option<String>,
});

impl Offering {
    pub fn key(&self) -> OfferingKey {
        OfferingKey::new(&self.unit, &self.campus, &self.term)
    }
}

record!(TimetableSlot {
    kind: EntryKind,
    day: Weekday,
    start: String,
    end: String,
    room: String,
});

record!(OfferingRequest {
    unit: String,
    campus: String,
    term: String,
    capacity: i32,
    teacher: Option<String>,
    timetable: Vec<TimetableSlot>,
});

record!(OfferingSummary {
    key: String,
    unit: String,
    title: String,
    credit_points: i32,
    campus: String,
    term: String,
    capacity: i32,
    enrolled: i32,
    active: bool,
    teacher: Option<String>,
});

record!(TimetableEntry {
    offering: OfferingKey,
    kind: EntryKind,
    day: Weekday,
    start: String,
    end: String,
    room: String,
});

record!(Enrollment {
    student: String,
    offering: OfferingKey,
    status: EnrollmentStatus,
    override_by: Option<String>,
    final_grade: Option<String>,
});

record!(EnrollmentRef { student: String, offering: OfferingKey });

record!(Score { student: String, score: i32 });

record!(CourseworkItem {
    offering: OfferingKey,
    assessment_name: String,
    weight: i32,
    scores: Vec<Score>,
});

record!(GradeEntry { student: String, grade: String });

record!(ApplicationForm {
    name: String,
    contact: ContactInfo,
    program: String,
    password: String,
});

record!(Application {
    id: String,
    name: String,
    contact: ContactInfo,
    program: String,
    term: String,
    status: RequestStatus,
    decided_by: Option<String>,
    student_id: Option<String>,
});

record!(GraduationApplication {
    id: String,
    student: String,
    status: RequestStatus,
    eligibility_snapshot: bool,
    decided_by: Option<String>,
});

record!(ProgramChangeRequest {
    id: String,
    student: String,
    new_program: String,
    new_major: Option<String>,
    status: RequestStatus,
    decided_by: Option<String>,
});

record!(InvoiceLine { description: String, amount: i64 });

record!(Invoice {
    id: String,
    student: String,
    term: String,
    lines: Vec<InvoiceLine>,
    total: i64,
    paid: i64,
});

record!(Payment {
    id: String,
    invoice: String,
    amount: i64,
    card_reference: String,
    timestamp: i64,
});

record!(Counter { name: String, next: i64 });

record!(Credential {
    username: String,
    subject: String,
    role: Role,
    salt: Vec<u8>,
    hash: Vec<u8>,
    iterations: i32,
    active: bool,
});

record!(SessionRecord { token: String, subject: String, role: Role, expires_at: i64 });
record!(Session { token: String, subject: String, role: Role, expires_at: i64 });
record!(Principal { subject: String, role: Role });
record!(SystemInfo { current_term: String, fee_per_credit: i64 });

record!(Profile {
    id: String,
    name: String,
    role: Role,
    contact: ContactInfo,
    program: Option<String>,
    major: Option<String>,
    status: Option<StudentStatus>,
});

record!(RequirementRow { unit: String, title: String, completed: bool });
record!(HistoryRow { unit: String, title: String, term: String, grade: String, credit_points: i32 });
record!(Rational { num: i64, den: i64 });

record!(History {
    student: String,
    rows: Vec<HistoryRow>,
    gpa: Option<Rational>,
    gpa_text: Option<String>,
});

record!(StudentDetails { profile: Profile, history: History });
record!(CourseworkRow { unit: String, assessment_name: String, weight: i32, score: i32 });
record!(ClassListRow { student: String, name: String });
record!(Eligibility { student: String, eligible: bool, missing: Vec<String> });

record!(GraduationRow {
    application: GraduationApplication,
    name: String,
    eligible: bool,
    missing: Vec<String>,
});

record!(ReportTable {
    kind: ReportKind,
    term: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
});

/// Academic term: a year and semester 1 or 2, written `2024-S1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub year: i32,
    pub semester: u8,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-S{}", self.year, self.semester)
    }
}

impl FromStr for Term {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("term `{s}` is not YYYY-S1 or YYYY-S2");
        let (y, sem) = s.split_once("-S").ok_or_else(bad)?;
        if y.len() != 4 || !y.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let semester = match sem {
            "1" => 1,
            "2" => 2,
            _ => return Err(bad()),
        };
        Ok(Term { year: y.parse().map_err(|_| bad())?, semester })
    }
}

/// Validates an `HH:MM` time of day and returns minutes past midnight.
pub fn parse_time(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    if h.len() != 2 || m.len() != 2 {
        return None;
    }
    let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
    (h < 24 && m < 60).then_some(h * 60 + m)
}

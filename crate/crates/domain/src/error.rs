use thiserror::Error;

/// Every business-rule failure. [`DomainError::code`] is the stable
/// identifier shared with the gateway and UI through `contract/error_codes.tsv`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("not authorized: {0}")]
    NotAuthorized(String),
    #[error("{0} belongs to someone else")]
    NotYours(String),
    #[error("unknown person {0}")]
    UnknownPerson(String),
    #[error("unknown program {0}")]
    UnknownProgram(String),
    #[error("unknown unit {0}")]
    UnknownUnit(String),
    #[error("unknown offering {0}")]
    UnknownOffering(String),
    #[error("unknown application {0}")]
    UnknownApplication(String),
    #[error("unknown request {0}")]
    UnknownRequest(String),
    #[error("unknown invoice {0}")]
    UnknownInvoice(String),
    #[error("{0} was already decided")]
    AlreadyDecided(String),
    #[error("offering {0} already exists")]
    DuplicateOffering(String),
    #[error("{student} already holds an enrollment in {unit} for {term}")]
    DuplicateEnrollment { student: String, unit: String, term: String },
    #[error("{0} already exists")]
    DuplicateRecord(String),
    #[error("{0} already has a pending request")]
    DuplicateRequest(String),
    #[error("offering {0} is full")]
    CapacityFull(String),
    #[error("offering {0} is not active")]
    OfferingInactive(String),
    #[error("student {0} is not admitted or active")]
    StudentInactive(String),
    #[error("missing prerequisites: {}", .0.join(", "))]
    PrerequisiteUnmet(Vec<String>),
    #[error("{0} is not enrolled")]
    NotEnrolled(String),
    #[error("{0} is already completed")]
    AlreadyCompleted(String),
    #[error("assessment weights would total {0}")]
    WeightOverflow(i32),
    #[error("student {0} is not enrolled in the offering")]
    NotEnrolledStudent(String),
    #[error("missing required units: {}", .0.join(", "))]
    NotEligible(Vec<String>),
    #[error("amount exceeds outstanding balance {0}")]
    Overpayment(i64),
    #[error("card {0} was declined")]
    GatewayDeclined(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

pub type DomainResult<T> = Result<T, DomainError>;

impl DomainError {
    pub fn code(&self) -> &'static str {
        use DomainError::*;
        match self {
            NotAuthorized(_) => "not-authorized",
            NotYours(_) => "not-yours",
            UnknownPerson(_) => "unknown-person",
            UnknownProgram(_) => "unknown-program",
            UnknownUnit(_) => "unknown-unit",
            UnknownOffering(_) => "unknown-offering",
            UnknownApplication(_) => "unknown-application",
            UnknownRequest(_) => "unknown-request",
            UnknownInvoice(_) => "unknown-invoice",
            AlreadyDecided(_) => "already-decided",
            DuplicateOffering(_) => "duplicate-offering",
            DuplicateEnrollment { .. } => "duplicate-enrollment",
            DuplicateRecord(_) => "duplicate-record",
            DuplicateRequest(_) => "duplicate-request",
            CapacityFull(_) => "capacity-full",
            OfferingInactive(_) => "offering-inactive",
            StudentInactive(_) => "student-inactive",
            PrerequisiteUnmet(_) => "prereq-unmet",
            NotEnrolled(_) => "not-enrolled",
            AlreadyCompleted(_) => "already-completed",
            WeightOverflow(_) => "weight-overflow",
            NotEnrolledStudent(_) => "not-enrolled-student",
            NotEligible(_) => "not-eligible",
            Overpayment(_) => "overpayment",
            GatewayDeclined(_) => "gateway-declined",
            InvalidArgument(_) => "invalid-argument",
            Storage(_) => "internal",
        }
    }

    /// Every code [`DomainError::code`] can return.
    pub const CODES: &'static [&'static str] = &[
        "not-authorized",
        "not-yours",
        "unknown-person",
        "unknown-program",
        "unknown-unit",
        "unknown-offering",
        "unknown-application",
        "unknown-request",
        "unknown-invoice",
        "already-decided",
        "duplicate-offering",
        "duplicate-enrollment",
        "duplicate-record",
        "duplicate-request",
        "capacity-full",
        "offering-inactive",
        "student-inactive",
        "prereq-unmet",
        "not-enrolled",
        "already-completed",
        "weight-overflow",
        "not-enrolled-student",
        "not-eligible",
        "overpayment",
        "gateway-declined",
        "invalid-argument",
        "internal",
    ];
}

pub(crate) fn invalid(msg: impl Into<String>) -> DomainError {
    DomainError::InvalidArgument(msg.into())
}

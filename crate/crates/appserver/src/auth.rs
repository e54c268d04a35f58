//! Credentials, session tokens and the role capability matrix.

use cis_domain::Role;
use pbkdf2::pbkdf2_hmac;
use rand::rngs::OsRng;
use rand::RngCore;
use sha2::Sha256;

pub const SALT_LEN: usize = 16;
pub const HASH_LEN: usize = 32;

pub fn new_salt() -> Vec<u8> {
    let mut salt = vec![0u8; SALT_LEN];
    OsRng.fill_bytes(&mut salt);
    salt
}

pub fn hash_password(password: &str, salt: &[u8], iterations: u32) -> Vec<u8> {
    let mut out = vec![0u8; HASH_LEN];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, iterations, &mut out);
    out
}

/// Compares without an early exit on the first differing byte.
pub fn verify_password(password: &str, salt: &[u8], iterations: u32, expected: &[u8]) -> bool {
    let got = hash_password(password, salt, iterations);
    got.len() == expected.len() && got.iter().zip(expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

/// 128 random bits as 32 lowercase hex characters.
pub fn new_token() -> String {
    let mut b = [0u8; 16];
    OsRng.fill_bytes(&mut b);
    b.iter().map(|x| format!("{x:02x}")).collect()
}

/// Every operation the servants expose, as `Interface.method`.
pub const OPERATIONS: &[&str] = &[
    "Auth.login",
    "Auth.logout",
    "Auth.whoami",
    "Auth.authorize",
    "Auth.system_info",
    "Admissions.submit_application",
    "Admissions.list_applications",
    "Admissions.get_application",
    "Admissions.decide_application",
    "Directory.get_profile",
    "Directory.update_profile",
    "Directory.student_details",
    "Directory.list_programs",
    "Directory.list_units",
    "Directory.create_program",
    "Directory.create_unit",
    "Directory.create_staff",
    "Directory.create_student",
    "Enrollments.list_offerings",
    "Enrollments.activate_offering",
    "Enrollments.enroll",
    "Enrollments.withdraw",
    "Enrollments.list_enrollments",
    "Records.program_requirements",
    "Records.academic_history",
    "Records.timetable",
    "Records.coursework_for_student",
    "Records.class_list",
    "Records.submit_coursework",
    "Records.finalize_grades",
    "Records.graduation_eligibility",
    "Records.apply_graduation",
    "Records.list_graduations",
    "Records.decide_graduation",
    "Records.request_program_change",
    "Records.list_program_changes",
    "Records.decide_program_change",
    "Finance.invoices",
    "Finance.pay_invoice",
    "Reporting.report",
];

/// Whether `role` holds the capability to call `operation` at all.
///
/// Record-level rules (own records only, assigned teacher only) are the
/// domain's business; this is the coarse menu-level partition by role.
pub fn allowed(role: Role, operation: &str) -> bool {
    let student = role.is_student();
    let academic = role.is_academic();
    let admin = role.is_admin();
    let (iface, method) = operation.split_once('.').unwrap_or(("", ""));
    match (iface, method) {
        ("Auth", "login" | "logout" | "whoami" | "authorize" | "system_info") => true,
        ("Admissions", "submit_application") => true,
        ("Admissions", "list_applications" | "get_application" | "decide_application") => admin,
        ("Directory", "get_profile" | "update_profile" | "list_programs" | "list_units") => true,
        ("Directory", "student_details") => academic || admin,
        ("Directory", "create_program" | "create_unit" | "create_staff" | "create_student") => {
            role == Role::AcademicServices
        }
        ("Enrollments", "list_offerings" | "list_enrollments") => true,
        ("Enrollments", "activate_offering") => role == Role::HeadOfDepartment,
        ("Enrollments", "enroll" | "withdraw") => student || academic,
        (
            "Records",
            "program_requirements" | "academic_history" | "timetable" | "coursework_for_student" | "graduation_eligibility",
        ) => true,
        ("Records", "class_list" | "finalize_grades") => academic || admin,
        ("Records", "submit_coursework") => academic,
        ("Records", "apply_graduation" | "request_program_change") => student,
        ("Records", "list_graduations" | "decide_graduation" | "list_program_changes" | "decide_program_change") => admin,
        ("Finance", "invoices" | "pay_invoice") => student,
        ("Reporting", "report") => admin,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_verify_and_differ_by_salt() {
        let s1 = new_salt();
        let s2 = new_salt();
        assert_ne!(s1, s2);
        let h = hash_password("secret", &s1, 100);
        assert!(verify_password("secret", &s1, 100, &h));
        assert!(!verify_password("Secret", &s1, 100, &h));
        assert!(!verify_password("secret", &s2, 100, &h));
        assert!(!verify_password("secret", &s1, 101, &h));
    }

    #[test]
    fn pbkdf2_matches_published_vector() {
        // PBKDF2-HMAC-SHA256, P = "password", S = "salt", c = 1, dkLen = 32.
        let h = hash_password("password", b"salt", 1);
        let hex: String = h.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "120fb6cffcf8b32c43e7225256c4f837a86548c92ccc35480805987cb70be17b");
    }

    #[test]
    fn tokens_are_32_hex_and_unique() {
        let a = new_token();
        let b = new_token();
        assert_eq!(a.len(), 32);
        assert!(a.bytes().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        assert_ne!(a, b);
    }

    #[test]
    fn unknown_operations_are_denied() {
        for r in Role::ALL {
            assert!(!allowed(*r, "Records.delete_everything"));
            assert!(!allowed(*r, "nonsense"));
        }
    }
}

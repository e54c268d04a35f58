//! The HTTP surface. Each route names exactly one contract method; its
//! arguments come from the session token, path segments, query parameters
//! and the JSON body, matched by parameter name.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Body {
    /// No body is read.
    None,
    /// A JSON object whose keys are parameter names.
    Fields,
    /// The whole body is the named parameter.
    Whole(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEffect {
    None,
    /// The reply is a Session; its token is set as the session cookie.
    Set,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub method: &'static str,
    pub path: &'static str,
    /// Registry name of the servant.
    pub service: &'static str,
    pub interface: &'static str,
    pub operation: &'static str,
    pub body: Body,
    /// Served without a session check.
    pub public: bool,
    pub session: SessionEffect,
}

impl Route {
    /// The capability the Auth servant is asked about.
    pub fn capability(&self) -> String {
        format!("{}.{}", self.interface, self.operation)
    }
}

const fn r(
    method: &'static str,
    path: &'static str,
    service: &'static str,
    interface: &'static str,
    operation: &'static str,
    body: Body,
) -> Route {
    Route { method, path, service, interface, operation, body, public: false, session: SessionEffect::None }
}

const fn public(mut route: Route) -> Route {
    route.public = true;
    route
}

const fn session(mut route: Route, effect: SessionEffect) -> Route {
    route.session = effect;
    route
}

use Body::{Fields, None as NoBody, Whole};

pub const ROUTES: &[Route] = &[
    session(public(r("POST", "/api/login", "auth", "Auth", "login", Fields)), SessionEffect::Set),
    session(r("POST", "/api/logout", "auth", "Auth", "logout", NoBody), SessionEffect::Clear),
    r("GET", "/api/session", "auth", "Auth", "whoami", NoBody),
    public(r("GET", "/api/config", "auth", "Auth", "system_info", NoBody)),
    public(r("POST", "/api/applications", "admissions", "Admissions", "submit_application", Whole("form"))),
    r("GET", "/api/applications", "admissions", "Admissions", "list_applications", NoBody),
    r("GET", "/api/applications/{id}", "admissions", "Admissions", "get_application", NoBody),
    r("GET", "/api/applications/{id}/decision", "admissions", "Admissions", "get_application", NoBody),
    r("POST", "/api/applications/{id}/decision", "admissions", "Admissions", "decide_application", Fields),
    r("GET", "/api/people/{person}/profile", "directory", "Directory", "get_profile", NoBody),
    r("PUT", "/api/people/{person}/profile", "directory", "Directory", "update_profile", Whole("contact")),
    r("GET", "/api/students/{student}", "directory", "Directory", "student_details", NoBody),
    r("GET", "/api/programs", "directory", "Directory", "list_programs", NoBody),
    r("POST", "/api/programs", "directory", "Directory", "create_program", Whole("program")),
    r("GET", "/api/units", "directory", "Directory", "list_units", NoBody),
    r("POST", "/api/units", "directory", "Directory", "create_unit", Whole("unit")),
    r("POST", "/api/staff", "directory", "Directory", "create_staff", Fields),
    r("POST", "/api/students", "directory", "Directory", "create_student", Fields),
    r("GET", "/api/students/{student}/requirements", "records", "Records", "program_requirements", NoBody),
    r("GET", "/api/students/{student}/history", "records", "Records", "academic_history", NoBody),
    r("GET", "/api/students/{student}/timetable", "records", "Records", "timetable", NoBody),
    r("GET", "/api/students/{student}/coursework", "records", "Records", "coursework_for_student", NoBody),
    r("GET", "/api/students/{student}/eligibility", "records", "Records", "graduation_eligibility", NoBody),
    r("GET", "/api/students/{student}/enrollments", "enrollment", "Enrollments", "list_enrollments", NoBody),
    r("GET", "/api/offerings", "enrollment", "Enrollments", "list_offerings", NoBody),
    r("POST", "/api/offerings", "enrollment", "Enrollments", "activate_offering", Whole("request")),
    r("GET", "/api/offerings/{offering}/classlist", "records", "Records", "class_list", NoBody),
    r("POST", "/api/enrollments", "enrollment", "Enrollments", "enroll", Fields),
    r("DELETE", "/api/enrollments", "enrollment", "Enrollments", "withdraw", Fields),
    r("POST", "/api/coursework", "records", "Records", "submit_coursework", Whole("item")),
    r("POST", "/api/grades", "records", "Records", "finalize_grades", Fields),
    r("POST", "/api/graduation", "records", "Records", "apply_graduation", NoBody),
    r("GET", "/api/graduation", "records", "Records", "list_graduations", NoBody),
    r("POST", "/api/graduation/{id}/decision", "records", "Records", "decide_graduation", Fields),
    r("POST", "/api/program-change", "records", "Records", "request_program_change", Fields),
    r("GET", "/api/program-change", "records", "Records", "list_program_changes", NoBody),
    r("POST", "/api/program-change/{id}/decision", "records", "Records", "decide_program_change", Fields),
    r("GET", "/api/invoices", "finance", "Finance", "invoices", NoBody),
    r("POST", "/api/payments", "finance", "Finance", "pay_invoice", Fields),
    r("GET", "/api/reports/{kind}", "reporting", "Reporting", "report", NoBody),
];

/// Path parameter names in a template, in order.
pub fn path_params(path: &str) -> Vec<&str> {
    path.split('/').filter_map(|seg| seg.strip_prefix('{')?.strip_suffix('}')).collect()
}

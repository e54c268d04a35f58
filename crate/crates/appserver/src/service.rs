//! The servants: each contract method authenticates the caller, checks the
//! capability matrix and runs the domain operation against a read view or
//! inside one store transaction.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use cis_domain::{
    admissions, directory, enrollment, finance, load, records, reports, save, Actor, Credential, DomainError, Field,
    Policy, Principal, Repo, Role, Session, SessionRecord, Staff, SystemInfo,
};
use cis_middleware::{Fault, IdlDocument, MethodSignature, Servant, Value};
use cis_store::{Store, StoreError};
use log::{debug, warn};
use thiserror::Error;

use crate::auth::{self, allowed};
use crate::storage::{TxnRepo, ViewRepo};

/// Seconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0))
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no session token supplied")]
    TokenMissing,
    #[error("session token not recognised")]
    TokenUnknown,
    #[error("session expired")]
    TokenExpired,
    #[error("bad username or password")]
    BadCredentials,
    #[error("account {0} is not active")]
    AccountInactive(String),
    #[error("{role} may not call {operation}")]
    Forbidden { role: Role, operation: String },
    #[error("malformed argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl AppError {
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Domain(e) => e.code(),
            AppError::TokenMissing => "token-missing",
            AppError::TokenUnknown => "token-unknown",
            AppError::TokenExpired => "token-expired",
            AppError::BadCredentials => "bad-credentials",
            AppError::AccountInactive(_) => "account-inactive",
            AppError::Forbidden { .. } => "forbidden",
            AppError::BadArgument(_) => "bad-request",
            AppError::Store(_) => "internal",
        }
    }
}

impl From<AppError> for Fault {
    fn from(e: AppError) -> Fault {
        Fault::new(e.code(), e.to_string())
    }
}

type AppResult<T> = Result<T, AppError>;

fn arg<T: Field>(args: &[Value], i: usize) -> AppResult<T> {
    let v = args.get(i).ok_or_else(|| AppError::BadArgument(format!("missing argument {i}")))?;
    T::from_value(v).map_err(|e| AppError::BadArgument(e.to_string()))
}

/// Shared state of every servant.
pub struct App {
    store: Store,
    doc: Arc<IdlDocument>,
    policy: Policy,
    ttl_secs: i64,
    iterations: u32,
    clock: Clock,
}

impl App {
    pub fn new(store: Store, doc: Arc<IdlDocument>, policy: Policy, ttl_hours: i64, iterations: u32, clock: Clock) -> App {
        App { store, doc, policy, ttl_secs: ttl_hours * 3600, iterations, clock }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    fn now(&self) -> i64 {
        (self.clock)()
    }

    /// Runs `f` against the committed state.
    pub fn read<T>(&self, f: impl FnOnce(&ViewRepo) -> AppResult<T>) -> AppResult<T> {
        let repo = ViewRepo { view: self.store.view()?, doc: &self.doc };
        f(&repo)
    }

    /// Runs `f` in one transaction: committed if it succeeds, rolled back
    /// otherwise. Transactions are serialized by the store's writer lane.
    pub fn write<T>(&self, f: impl FnOnce(&mut TxnRepo) -> AppResult<T>) -> AppResult<T> {
        let mut txn = self.store.begin()?;
        let result = {
            let mut repo = TxnRepo { txn: &mut txn, doc: &self.doc };
            f(&mut repo)
        };
        match result {
            Ok(v) => {
                txn.commit()?;
                Ok(v)
            }
            Err(e) => {
                txn.rollback()?;
                Err(e)
            }
        }
    }

    /// Resolves `token` to its subject and checks `operation` against the
    /// capability matrix.
    pub fn principal(&self, repo: &dyn Repo, token: &str, operation: &str) -> AppResult<Actor> {
        if token.is_empty() {
            return Err(AppError::TokenMissing);
        }
        let s = load::<SessionRecord>(repo, token)?.ok_or(AppError::TokenUnknown)?;
        if s.expires_at <= self.now() {
            return Err(AppError::TokenExpired);
        }
        if !allowed(s.role, operation) {
            return Err(AppError::Forbidden { role: s.role, operation: operation.to_string() });
        }
        Ok(Actor::new(s.subject, s.role))
    }

    fn credential(&self, username: &str, subject: &str, role: Role, password: &str, active: bool) -> AppResult<Credential> {
        if password.is_empty() {
            return Err(DomainError::InvalidArgument("password is required".into()).into());
        }
        let salt = auth::new_salt();
        let hash = auth::hash_password(password, &salt, self.iterations);
        Ok(Credential {
            username: username.to_string(),
            subject: subject.to_string(),
            role,
            salt,
            hash,
            iterations: self.iterations as i32,
            active,
        })
    }

    /// Creates the academic-services account `id` unless it already exists.
    pub fn bootstrap_admin(&self, id: &str, password: &str) -> AppResult<bool> {
        cis_domain::check_id("admin user", id)?;
        if self.read(|r| Ok(load::<Staff>(r, id)?.is_some()))? {
            return Ok(false);
        }
        let cred = self.credential(id, id, Role::AcademicServices, password, true)?;
        self.write(|r| {
            save(
                r,
                &Staff {
                    id: id.to_string(),
                    name: "Academic Services".into(),
                    contact: cis_domain::ContactInfo::blank(),
                    role: Role::AcademicServices,
                    teaching_assignments: vec![],
                },
            )?;
            save(r, &cred)?;
            Ok(true)
        })
    }

    pub fn login(&self, username: &str, password: &str) -> AppResult<Session> {
        let cred = self.read(|r| Ok(load::<Credential>(r, username)?))?;
        let Some(cred) = cred else {
            // Same work as a real check so unknown users are not faster.
            auth::hash_password(password, b"unknown-user-salt", self.iterations);
            return Err(AppError::BadCredentials);
        };
        if !auth::verify_password(password, &cred.salt, cred.iterations.max(1) as u32, &cred.hash) {
            return Err(AppError::BadCredentials);
        }
        if !cred.active {
            return Err(AppError::AccountInactive(username.to_string()));
        }
        let rec = SessionRecord {
            token: auth::new_token(),
            subject: cred.subject.clone(),
            role: cred.role,
            expires_at: self.now() + self.ttl_secs,
        };
        self.write(|r| Ok(save(r, &rec)?))?;
        Ok(Session { token: rec.token, subject: rec.subject, role: rec.role, expires_at: rec.expires_at })
    }

    /// Dispatches `Interface.method` with decoded arguments.
    pub fn call(&self, operation: &str, args: &[Value]) -> AppResult<Value> {
        let p = &self.policy;
        // Read-only operation taking the token as its first argument.
        macro_rules! read {
            (|$r:ident, $a:ident| $body:expr) => {{
                let token: String = arg(args, 0)?;
                self.read(|$r| {
                    let $a = self.principal($r, &token, operation)?;
                    Ok(Field::to_value(&$body?))
                })
            }};
        }
        macro_rules! write {
            (|$r:ident, $a:ident| $body:expr) => {{
                let token: String = arg(args, 0)?;
                self.write(|$r| {
                    let $a = self.principal($r, &token, operation)?;
                    Ok(Field::to_value(&$body?))
                })
            }};
        }
        match operation {
            "Auth.login" => Ok(self.login(&arg::<String>(args, 0)?, &arg::<String>(args, 1)?)?.to_value()),
            "Auth.logout" => {
                let token: String = arg(args, 0)?;
                write!(|r, _a| cis_domain::remove::<SessionRecord>(r, &token).map(|_| true))
            }
            "Auth.whoami" => {
                let token: String = arg(args, 0)?;
                read!(|r, a| {
                    let s = load::<SessionRecord>(r, &token)?.ok_or(AppError::TokenUnknown)?;
                    Ok::<_, AppError>(Session { token: s.token, subject: a.id, role: a.role, expires_at: s.expires_at })
                })
            }
            "Auth.authorize" => {
                let capability: String = arg(args, 1)?;
                let token: String = arg(args, 0)?;
                self.read(|r| {
                    let a = self.principal(r, &token, &capability)?;
                    Ok(Principal { subject: a.id, role: a.role }.to_value())
                })
            }
            "Auth.system_info" => {
                Ok(SystemInfo { current_term: p.current_term.clone(), fee_per_credit: p.fee_per_credit }.to_value())
            }

            "Admissions.submit_application" => {
                let form: cis_domain::ApplicationForm = arg(args, 0)?;
                if form.password.is_empty() {
                    return Err(DomainError::InvalidArgument("password is required".into()).into());
                }
                let salt = auth::new_salt();
                let hash = auth::hash_password(&form.password, &salt, self.iterations);
                self.write(|r| {
                    let app = admissions::submit_application(r, p, &form)?;
                    save(
                        r,
                        &Credential {
                            username: app.id.clone(),
                            subject: app.id.clone(),
                            role: Role::Student,
                            salt,
                            hash,
                            iterations: self.iterations as i32,
                            active: false,
                        },
                    )?;
                    Ok(app.to_value())
                })
            }
            "Admissions.list_applications" => read!(|r, a| admissions::list_applications(r, &a, arg(args, 1)?)),
            "Admissions.get_application" => read!(|r, a| admissions::get_application(r, &a, &arg::<String>(args, 1)?)),
            "Admissions.decide_application" => write!(|r, a| {
                let app = admissions::decide_application(r, &a, &arg::<String>(args, 1)?, arg(args, 2)?)?;
                if let Some(sid) = &app.student_id {
                    // The applicant's password carries over to the new student account.
                    if let Some(c) = load::<Credential>(r, &app.id)? {
                        save(r, &Credential { username: sid.clone(), subject: sid.clone(), active: true, ..c })?;
                    }
                }
                Ok::<_, AppError>(app)
            }),

            "Directory.get_profile" => read!(|r, a| directory::get_profile(r, &a, &arg::<String>(args, 1)?)),
            "Directory.update_profile" => {
                write!(|r, a| directory::update_profile(r, &a, &arg::<String>(args, 1)?, &arg(args, 2)?))
            }
            "Directory.student_details" => read!(|r, a| directory::student_details(r, p, &a, &arg::<String>(args, 1)?)),
            "Directory.list_programs" => read!(|r, _a| directory::list_programs(r)),
            "Directory.list_units" => read!(|r, _a| directory::list_units(r)),
            "Directory.create_program" => write!(|r, a| directory::create_program(r, &a, &arg(args, 1)?)),
            "Directory.create_unit" => write!(|r, a| directory::create_unit(r, &a, &arg(args, 1)?)),
            "Directory.create_staff" => {
                let staff: Staff = arg(args, 1)?;
                let password: String = arg(args, 2)?;
                write!(|r, a| {
                    let s = directory::create_staff(r, &a, &staff)?;
                    save(r, &self.credential(&s.id, &s.id, s.role, &password, true)?)?;
                    Ok::<_, AppError>(s)
                })
            }
            "Directory.create_student" => {
                let student: cis_domain::Student = arg(args, 1)?;
                let password: String = arg(args, 2)?;
                write!(|r, a| {
                    let s = directory::create_student(r, &a, &student)?;
                    save(r, &self.credential(&s.id, &s.id, Role::Student, &password, true)?)?;
                    Ok::<_, AppError>(s)
                })
            }

            "Enrollments.list_offerings" => {
                read!(|r, _a| enrollment::list_offerings(r, arg::<Option<String>>(args, 1)?.as_deref()))
            }
            "Enrollments.activate_offering" => write!(|r, a| enrollment::activate_offering(r, p, &a, &arg(args, 1)?)),
            "Enrollments.enroll" => {
                write!(|r, a| enrollment::enroll(r, p, &a, &arg::<String>(args, 1)?, &arg(args, 2)?))
            }
            "Enrollments.withdraw" => {
                write!(|r, a| enrollment::withdraw(r, p, &a, &arg::<String>(args, 1)?, &arg(args, 2)?))
            }
            "Enrollments.list_enrollments" => read!(|r, a| enrollment::list_enrollments(r, &a, &arg::<String>(args, 1)?)),

            "Records.program_requirements" => {
                read!(|r, a| records::program_requirements(r, p, &a, &arg::<String>(args, 1)?))
            }
            "Records.academic_history" => read!(|r, a| records::academic_history(r, p, &a, &arg::<String>(args, 1)?)),
            "Records.timetable" => {
                read!(|r, a| records::timetable(r, &a, &arg::<String>(args, 1)?, &arg::<String>(args, 2)?))
            }
            "Records.coursework_for_student" => {
                read!(|r, a| records::coursework_for_student(r, &a, &arg::<String>(args, 1)?, &arg::<String>(args, 2)?))
            }
            "Records.class_list" => read!(|r, a| records::class_list(r, &a, &arg(args, 1)?)),
            "Records.submit_coursework" => write!(|r, a| records::submit_coursework(r, &a, &arg(args, 1)?)),
            "Records.finalize_grades" => {
                let grades: Vec<cis_domain::GradeEntry> = arg(args, 2)?;
                write!(|r, a| records::finalize_grades(r, p, &a, &arg(args, 1)?, &grades))
            }
            "Records.graduation_eligibility" => {
                read!(|r, a| records::graduation_eligibility(r, p, &a, &arg::<String>(args, 1)?))
            }
            "Records.apply_graduation" => write!(|r, a| records::apply_graduation(r, p, &a)),
            "Records.list_graduations" => read!(|r, a| records::list_graduations(r, p, &a, arg(args, 1)?)),
            "Records.decide_graduation" => {
                write!(|r, a| records::decide_graduation(r, p, &a, &arg::<String>(args, 1)?, arg(args, 2)?))
            }
            "Records.request_program_change" => write!(|r, a| {
                let major: Option<String> = arg(args, 2)?;
                records::request_program_change(r, &a, &arg::<String>(args, 1)?, major.as_deref())
            }),
            "Records.list_program_changes" => read!(|r, a| records::list_program_changes(r, &a, arg(args, 1)?)),
            "Records.decide_program_change" => {
                write!(|r, a| records::decide_program_change(r, &a, &arg::<String>(args, 1)?, arg(args, 2)?))
            }

            "Finance.invoices" => read!(|r, a| finance::invoices(r, &a)),
            "Finance.pay_invoice" => {
                let now = self.now();
                write!(|r, a| finance::pay_invoice(
                    r,
                    p,
                    &a,
                    &arg::<String>(args, 1)?,
                    arg(args, 2)?,
                    &arg::<String>(args, 3)?,
                    now
                ))
            }

            "Reporting.report" => {
                read!(|r, a| reports::report(r, p, &a, arg(args, 1)?, &arg::<String>(args, 2)?))
            }
            other => Err(AppError::BadArgument(format!("no operation {other}"))),
        }
    }
}

/// One contract interface served by the shared [`App`].
pub struct Service {
    pub app: Arc<App>,
    pub interface: String,
}

impl Servant for Service {
    fn dispatch(&self, method: &MethodSignature, args: Vec<Value>) -> Result<Value, Fault> {
        let operation = format!("{}.{}", self.interface, method.name);
        self.app.call(&operation, &args).map_err(|e| {
            match &e {
                AppError::Store(_) | AppError::Domain(DomainError::Storage(_)) => warn!("{operation}: {e}"),
                _ => debug!("{operation}: {e}"),
            }
            e.into()
        })
    }
}

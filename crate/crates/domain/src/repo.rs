//! State handle the domain operates on.
//!
//! The app server implements [`Repo`] over a store transaction or read view;
//! tests use [`MemRepo`]. Entities live under their record name as kind and
//! a string key.

use std::collections::BTreeMap;
use std::ops::Bound;

use cis_middleware::Value;

use crate::error::{DomainError, DomainResult};
use crate::model::*;

pub trait Repo {
    fn get_value(&self, kind: &str, key: &str) -> DomainResult<Option<Value>>;
    /// Values of `kind` whose key starts with `prefix`, in key order.
    fn scan_values(&self, kind: &str, prefix: &str) -> DomainResult<Vec<Value>>;
    fn put_value(&mut self, kind: &str, key: &str, value: Value) -> DomainResult<()>;
    fn delete_value(&mut self, kind: &str, key: &str) -> DomainResult<()>;
}

/// A stored entity.
pub trait Entity: Field {
    const KIND: &'static str;
    fn key(&self) -> String;
}

macro_rules! entity {
    ($t:ident, |$s:ident| $key:expr) => {
        impl Entity for $t {
            const KIND: &'static str = $t::RECORD;
            fn key(&self) -> String {
                let $s = self;
                $key
            }
        }
    };
}

entity!(Student, |s| s.id.clone());
entity!(Staff, |s| s.id.clone());
entity!(Program, |p| p.id.clone());
entity!(Unit, |u| u.code.clone());
entity!(Offering, |o| o.key().to_string());
entity!(TimetableEntry, |e| format!("{}/{}/{}/{}", e.offering, e.kind, e.day.index(), e.start));
entity!(Enrollment, |e| format!("{}/{}", e.offering, e.student));
entity!(EnrollmentRef, |e| format!("{}/{}", e.student, e.offering));
entity!(CourseworkItem, |c| format!("{}/{}", c.offering, c.assessment_name));
entity!(Application, |a| a.id.clone());
entity!(GraduationApplication, |g| g.id.clone());
entity!(ProgramChangeRequest, |p| p.id.clone());
entity!(Invoice, |i| i.id.clone());
entity!(Payment, |p| format!("{}/{}", p.invoice, p.id));
entity!(Counter, |c| c.name.clone());
entity!(Credential, |c| c.username.clone());
entity!(SessionRecord, |s| s.token.clone());

fn decode<T: Entity>(v: &Value) -> DomainResult<T> {
    T::from_value(v).map_err(|e| DomainError::Storage(format!("stored {} does not decode: {e}", T::KIND)))
}

pub fn load<T: Entity>(repo: &dyn Repo, key: &str) -> DomainResult<Option<T>> {
    repo.get_value(T::KIND, key)?.map(|v| decode(&v)).transpose()
}

pub fn exists<T: Entity>(repo: &dyn Repo, key: &str) -> DomainResult<bool> {
    Ok(repo.get_value(T::KIND, key)?.is_some())
}

pub fn save<T: Entity>(repo: &mut dyn Repo, e: &T) -> DomainResult<()> {
    repo.put_value(T::KIND, &e.key(), e.to_value())
}

pub fn remove<T: Entity>(repo: &mut dyn Repo, key: &str) -> DomainResult<()> {
    repo.delete_value(T::KIND, key)
}

pub fn scan<T: Entity>(repo: &dyn Repo, prefix: &str) -> DomainResult<Vec<T>> {
    repo.scan_values(T::KIND, prefix)?.iter().map(decode).collect()
}

/// Allocates the next value of a named counter, starting at 1.
pub fn next_counter(repo: &mut dyn Repo, name: &str) -> DomainResult<i64> {
    let mut c = load::<Counter>(repo, name)?.unwrap_or(Counter { name: name.to_string(), next: 1 });
    let n = c.next;
    c.next += 1;
    save(repo, &c)?;
    Ok(n)
}

/// In-memory [`Repo`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemRepo {
    pub entries: BTreeMap<(String, String), Value>,
}

impl MemRepo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Repo for MemRepo {
    fn get_value(&self, kind: &str, key: &str) -> DomainResult<Option<Value>> {
        Ok(self.entries.get(&(kind.to_string(), key.to_string())).cloned())
    }

    fn scan_values(&self, kind: &str, prefix: &str) -> DomainResult<Vec<Value>> {
        let start = (kind.to_string(), prefix.to_string());
        Ok(self
            .entries
            .range((Bound::Included(start), Bound::Unbounded))
            .take_while(|((k, key), _)| k == kind && key.starts_with(prefix))
            .map(|(_, v)| v.clone())
            .collect())
    }

    fn put_value(&mut self, kind: &str, key: &str, value: Value) -> DomainResult<()> {
        self.entries.insert((kind.to_string(), key.to_string()), value);
        Ok(())
    }

    fn delete_value(&mut self, kind: &str, key: &str) -> DomainResult<()> {
        self.entries.remove(&(kind.to_string(), key.to_string()));
        Ok(())
    }
}

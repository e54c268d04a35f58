//! Dynamic values exchanged through the middleware.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::idl::{IdlDocument, IdlType};

/// A tagged value tree mirroring the [`IdlType`] kinds.
///
/// Records are field maps keyed by name; the codec writes them in the
/// declaration order of the record type, not map order.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    I32(i32),
    I64(i64),
    F64(f64),
    Str(String),
    Bytes(Vec<u8>),
    Opt(Option<Box<Value>>),
    List(Vec<Value>),
    Record(BTreeMap<String, Value>),
    Enum(u32),
}

// Floats compare by bit pattern so that NaN payloads survive round-trip checks.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a == b,
            (I32(a), I32(b)) => a == b,
            (I64(a), I64(b)) => a == b,
            (F64(a), F64(b)) => a.to_bits() == b.to_bits(),
            (Str(a), Str(b)) => a == b,
            (Bytes(a), Bytes(b)) => a == b,
            (Opt(a), Opt(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Record(a), Record(b)) => a == b,
            (Enum(a), Enum(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("expected {expected}, found {found}")]
    WrongKind { expected: &'static str, found: &'static str },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn some(v: Value) -> Value {
        Value::Opt(Some(Box::new(v)))
    }

    pub fn none() -> Value {
        Value::Opt(None)
    }

    pub fn opt(v: Option<Value>) -> Value {
        Value::Opt(v.map(Box::new))
    }

    pub fn record<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        Value::List(items.into_iter().collect())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::I32(_) => "i32",
            Value::I64(_) => "i64",
            Value::F64(_) => "f64",
            Value::Str(_) => "string",
            Value::Bytes(_) => "bytes",
            Value::Opt(_) => "optional",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Enum(_) => "enum",
        }
    }

    fn wrong(&self, expected: &'static str) -> ValueError {
        ValueError::WrongKind { expected, found: self.kind_name() }
    }

    pub fn as_bool(&self) -> Result<bool, ValueError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(other.wrong("bool")),
        }
    }

    pub fn as_i32(&self) -> Result<i32, ValueError> {
        match self {
            Value::I32(n) => Ok(*n),
            other => Err(other.wrong("i32")),
        }
    }

    pub fn as_i64(&self) -> Result<i64, ValueError> {
        match self {
            Value::I64(n) => Ok(*n),
            other => Err(other.wrong("i64")),
        }
    }

    pub fn as_f64(&self) -> Result<f64, ValueError> {
        match self {
            Value::F64(n) => Ok(*n),
            other => Err(other.wrong("f64")),
        }
    }

    pub fn as_str(&self) -> Result<&str, ValueError> {
        match self {
            Value::Str(s) => Ok(s),
            other => Err(other.wrong("string")),
        }
    }

    pub fn as_bytes(&self) -> Result<&[u8], ValueError> {
        match self {
            Value::Bytes(b) => Ok(b),
            other => Err(other.wrong("bytes")),
        }
    }

    pub fn as_opt(&self) -> Result<Option<&Value>, ValueError> {
        match self {
            Value::Opt(o) => Ok(o.as_deref()),
            other => Err(other.wrong("optional")),
        }
    }

    pub fn as_list(&self) -> Result<&[Value], ValueError> {
        match self {
            Value::List(items) => Ok(items),
            other => Err(other.wrong("list")),
        }
    }

    pub fn as_record(&self) -> Result<&BTreeMap<String, Value>, ValueError> {
        match self {
            Value::Record(fields) => Ok(fields),
            other => Err(other.wrong("record")),
        }
    }

    pub fn as_enum(&self) -> Result<u32, ValueError> {
        match self {
            Value::Enum(i) => Ok(*i),
            other => Err(other.wrong("enum")),
        }
    }

    /// Looks up a record field.
    pub fn field(&self, name: &str) -> Result<&Value, ValueError> {
        self.as_record()?
            .get(name)
            .ok_or_else(|| ValueError::MissingField(name.to_string()))
    }

    pub fn str_field(&self, name: &str) -> Result<String, ValueError> {
        Ok(self.field(name)?.as_str()?.to_string())
    }

    pub fn opt_str_field(&self, name: &str) -> Result<Option<String>, ValueError> {
        match self.field(name)?.as_opt()? {
            Some(v) => Ok(Some(v.as_str()?.to_string())),
            None => Ok(None),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<i32> for Value {
    fn from(n: i32) -> Self {
        Value::I32(n)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::I64(n)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::F64(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(o: Option<T>) -> Self {
        Value::Opt(o.map(|v| Box::new(v.into())))
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(items: Vec<T>) -> Self {
        Value::List(items.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::I32(n) => write!(f, "{n}"),
            Value::I64(n) => write!(f, "{n}L"),
            Value::F64(n) => write!(f, "{n:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bytes(b) => {
                f.write_str("0x")?;
                b.iter().try_for_each(|x| write!(f, "{x:02x}"))
            }
            Value::Opt(None) => f.write_str("absent"),
            Value::Opt(Some(v)) => write!(f, "present({v})"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Record(fields) => {
                f.write_str("{")?;
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
            Value::Enum(i) => write!(f, "#{i}"),
        }
    }
}

/// True iff `v` has the shape of `t`: every record field present and no
/// extras, enum indices in range, list elements all conforming.
pub fn conforms_to(v: &Value, t: &IdlType, doc: &IdlDocument) -> bool {
    match (v, t) {
        (Value::Bool(_), IdlType::Bool)
        | (Value::I32(_), IdlType::I32)
        | (Value::I64(_), IdlType::I64)
        | (Value::F64(_), IdlType::F64)
        | (Value::Str(_), IdlType::String)
        | (Value::Bytes(_), IdlType::Bytes) => true,
        (Value::Opt(None), IdlType::Optional(_)) => true,
        (Value::Opt(Some(inner)), IdlType::Optional(ty)) => conforms_to(inner, ty, doc),
        (Value::List(items), IdlType::List(ty)) => items.iter().all(|i| conforms_to(i, ty, doc)),
        (Value::Record(fields), IdlType::Record(name)) => match doc.record(name) {
            Some(def) => {
                fields.len() == def.fields.len()
                    && def
                        .fields
                        .iter()
                        .all(|fd| fields.get(&fd.name).is_some_and(|fv| conforms_to(fv, &fd.ty, doc)))
            }
            None => false,
        },
        (Value::Enum(i), IdlType::Enum(name)) => {
            doc.enum_def(name).is_some_and(|e| (*i as usize) < e.cases.len())
        }
        _ => false,
    }
}

//! Message body layouts layered on top of [`crate::wire`] frames.
//!
//! * Request: object name, method name, then each argument.
//! * Reply: the encoded return value.
//! * ErrorReply: error code then message, both strings.
//! * Resolve: the name to look up. ResolveReply: an encoded `ObjectRef`.

use std::fmt;
use std::sync::OnceLock;

use crate::codec::{encode_into, CodecError, Reader};
use crate::idl::{parse_idl, IdlDocument, IdlType};
use crate::value::{Value, ValueError};

/// Error codes produced by the middleware itself rather than by servants.
pub mod codes {
    pub const NO_SUCH_OBJECT: &str = "no-such-object";
    pub const NO_SUCH_METHOD: &str = "no-such-method";
    pub const BAD_REQUEST: &str = "bad-request";
    pub const NOT_BOUND: &str = "not-bound";
    pub const NO_NAMING: &str = "no-naming-service";
    pub const INTERNAL: &str = "internal";
}

pub const NAMING_OBJECT: &str = "NameService";
pub const NAMING_INTERFACE: &str = "NamingContext";

const NAMING_IDL: &str = r#"
// Builtin naming service contract.
record ObjectRef {
    host: string;
    port: i32;
    object_name: string;
    interface_name: string;
}

interface NamingContext {
    bind(name: string, target: ObjectRef) -> bool;
    resolve(name: string) -> ObjectRef throws not-bound;
    list() -> list<string>;
}
"#;

/// The builtin naming contract, shared by every peer.
pub fn naming_idl() -> &'static IdlDocument {
    static DOC: OnceLock<IdlDocument> = OnceLock::new();
    DOC.get_or_init(|| parse_idl(NAMING_IDL).expect("builtin naming IDL is valid"))
}

/// Splits `host:port`; the host may be a bracketed IPv6 literal.
pub fn split_endpoint(endpoint: &str) -> Result<(String, u16), String> {
    let (host, port) = endpoint.rsplit_once(':').ok_or_else(|| format!("endpoint `{endpoint}` lacks a port"))?;
    let port = port.parse().map_err(|_| format!("endpoint `{endpoint}` has a bad port"))?;
    let host = host.trim_start_matches('[').trim_end_matches(']');
    if host.is_empty() {
        return Err(format!("endpoint `{endpoint}` lacks a host"));
    }
    Ok((host.to_string(), port))
}

/// Location of a servant: endpoint plus the name and interface it is bound under.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectRef {
    pub host: String,
    pub port: u16,
    pub object_name: String,
    pub interface_name: String,
}

impl ObjectRef {
    pub fn new(host: impl Into<String>, port: u16, object_name: impl Into<String>, interface_name: impl Into<String>) -> Self {
        ObjectRef {
            host: host.into(),
            port,
            object_name: object_name.into(),
            interface_name: interface_name.into(),
        }
    }

    /// Reference to the naming servant hosted at `host:port`.
    pub fn naming(host: impl Into<String>, port: u16) -> Self {
        ObjectRef::new(host, port, NAMING_OBJECT, NAMING_INTERFACE)
    }

    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }

    /// Naming servant at a `host:port` endpoint.
    pub fn naming_at(endpoint: &str) -> Result<Self, String> {
        let (host, port) = split_endpoint(endpoint)?;
        Ok(ObjectRef::naming(host, port))
    }

    pub fn idl_type() -> IdlType {
        IdlType::Record("ObjectRef".into())
    }

    pub fn to_value(&self) -> Value {
        Value::record([
            ("host", Value::str(&self.host)),
            ("port", Value::I32(i32::from(self.port))),
            ("object_name", Value::str(&self.object_name)),
            ("interface_name", Value::str(&self.interface_name)),
        ])
    }

    pub fn from_value(v: &Value) -> Result<Self, ValueError> {
        let port = v.field("port")?.as_i32()?;
        let port = u16::try_from(port).map_err(|_| ValueError::Invalid {
            field: "port".into(),
            reason: format!("{port} out of range"),
        })?;
        Ok(ObjectRef {
            host: v.str_field("host")?,
            port,
            object_name: v.str_field("object_name")?,
            interface_name: v.str_field("interface_name")?,
        })
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}:{}#{}", self.object_name, self.host, self.port, self.interface_name)
    }
}

/// Error raised by a servant, carried in an ErrorReply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub code: String,
    pub message: String,
}

impl Fault {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Fault { code: code.into(), message: message.into() }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for Fault {}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_fault(fault: &Fault) -> Vec<u8> {
    let mut out = Vec::new();
    put_str(&mut out, &fault.code);
    put_str(&mut out, &fault.message);
    out
}

pub fn decode_fault(body: &[u8]) -> Result<Fault, CodecError> {
    let mut r = Reader::new(body);
    let code = r.string()?;
    let message = r.string()?;
    Ok(Fault { code, message })
}

/// Request body header: target object and method name. Arguments follow at `args_offset`.
pub struct RequestHead {
    pub object_name: String,
    pub method: String,
    pub args_offset: usize,
}

pub fn decode_request_head(body: &[u8]) -> Result<RequestHead, CodecError> {
    let mut r = Reader::new(body);
    let object_name = r.string()?;
    let method = r.string()?;
    Ok(RequestHead { object_name, method, args_offset: r.position() })
}

pub fn encode_request(
    object_name: &str,
    method: &str,
    args: &[(Value, &IdlType)],
    doc: &IdlDocument,
) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    put_str(&mut out, object_name);
    put_str(&mut out, method);
    for (v, t) in args {
        encode_into(&mut out, v, t, doc)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_round_trip() {
        let f = Fault::new("capacity-full", "offering is full");
        assert_eq!(decode_fault(&encode_fault(&f)).unwrap(), f);
    }

    #[test]
    fn object_ref_value_round_trip() {
        let r = ObjectRef::new("10.0.0.1", 7100, "enrollment", "Enrollment");
        let v = r.to_value();
        assert!(crate::value::conforms_to(&v, &ObjectRef::idl_type(), naming_idl()));
        assert_eq!(ObjectRef::from_value(&v).unwrap(), r);
    }
}

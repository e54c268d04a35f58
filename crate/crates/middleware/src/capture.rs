//! Pretty-printer for captured middleware traffic.
//!
//! A capture is a plain concatenation of frames as they appeared on one
//! direction (or both, interleaved) of a connection.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Cursor;

use crate::codec::{decode_exact, Reader};
use crate::idl::{IdlDocument, MethodSignature};
use crate::protocol::{decode_fault, decode_request_head, naming_idl, ObjectRef};
use crate::wire::{unframe, MessageKind, WireError, HEADER_LEN};

const HEX_PREVIEW: usize = 64;

/// Renders every frame in `bytes`. When `doc` is given, request arguments and
/// reply values are decoded for methods whose name is unique across its
/// interfaces. Decoding stops at the first malformed frame, which is reported.
pub fn describe_capture(bytes: &[u8], doc: Option<&IdlDocument>) -> String {
    let mut out = String::new();
    let mut cur = Cursor::new(bytes);
    let mut calls: HashMap<u64, &MethodSignature> = HashMap::new();
    let mut index = 0usize;
    loop {
        let offset = cur.position() as usize;
        let msg = match unframe(&mut cur, usize::MAX) {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                let _ = writeln!(out, "#{index} @{offset}: {}", describe_error(&e));
                break;
            }
        };
        let _ = writeln!(
            out,
            "#{index} @{offset}: {} id={} body={}B",
            msg.kind,
            msg.request_id,
            msg.body.len()
        );
        match msg.kind {
            MessageKind::Request => match decode_request_head(&msg.body) {
                Ok(head) => {
                    let _ = writeln!(out, "    call {}.{}", head.object_name, head.method);
                    let args = &msg.body[head.args_offset..];
                    match doc.and_then(|d| unique_method(d, &head.method).map(|m| (d, m))) {
                        Some((d, sig)) => {
                            calls.insert(msg.request_id, sig);
                            let mut r = Reader::new(args);
                            for p in &sig.params {
                                match r.value(&p.ty, d) {
                                    Ok(v) => {
                                        let _ = writeln!(out, "    {} = {v}", p.name);
                                    }
                                    Err(e) => {
                                        let _ = writeln!(out, "    {} = <{e}>", p.name);
                                        break;
                                    }
                                }
                            }
                        }
                        None => hex_line(&mut out, "args", args),
                    }
                }
                Err(e) => {
                    let _ = writeln!(out, "    <malformed request: {e}>");
                }
            },
            MessageKind::Reply => match (calls.get(&msg.request_id), doc) {
                (Some(sig), Some(d)) => match decode_exact(&msg.body, &sig.returns, d) {
                    Ok(v) => {
                        let _ = writeln!(out, "    returns {v}");
                    }
                    Err(e) => {
                        let _ = writeln!(out, "    <malformed reply: {e}>");
                    }
                },
                _ => hex_line(&mut out, "value", &msg.body),
            },
            MessageKind::ErrorReply => match decode_fault(&msg.body) {
                Ok(f) => {
                    let _ = writeln!(out, "    error {}: {}", f.code, f.message);
                }
                Err(e) => {
                    let _ = writeln!(out, "    <malformed error reply: {e}>");
                }
            },
            MessageKind::Resolve => match Reader::new(&msg.body).string() {
                Ok(name) => {
                    let _ = writeln!(out, "    resolve {name:?}");
                }
                Err(e) => {
                    let _ = writeln!(out, "    <malformed resolve: {e}>");
                }
            },
            MessageKind::ResolveReply => {
                let decoded = decode_exact(&msg.body, &ObjectRef::idl_type(), naming_idl())
                    .ok()
                    .and_then(|v| ObjectRef::from_value(&v).ok());
                match decoded {
                    Some(r) => {
                        let _ = writeln!(out, "    -> {r}");
                    }
                    None => hex_line(&mut out, "body", &msg.body),
                }
            }
            MessageKind::Ping | MessageKind::Pong => {}
        }
        index += 1;
    }
    let _ = writeln!(out, "{index} frame(s)");
    out
}

fn describe_error(e: &WireError) -> String {
    match e {
        WireError::Truncated => format!("truncated frame (header is {HEADER_LEN} bytes)"),
        other => other.to_string(),
    }
}

fn unique_method<'a>(doc: &'a IdlDocument, name: &str) -> Option<&'a MethodSignature> {
    let mut found = doc.interfaces.iter().filter_map(|i| i.method(name));
    let first = found.next()?;
    found.next().is_none().then_some(first)
}

fn hex_line(out: &mut String, label: &str, bytes: &[u8]) {
    let shown = &bytes[..bytes.len().min(HEX_PREVIEW)];
    let mut hex = String::new();
    for b in shown {
        let _ = write!(hex, "{b:02x} ");
    }
    let more = if bytes.len() > HEX_PREVIEW { "..." } else { "" };
    let _ = writeln!(out, "    {label}: {}{more}", hex.trim_end());
}

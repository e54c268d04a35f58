//! Deterministic binary marshalling of [`Value`]s against [`IdlType`]s.
//!
//! All integers are little-endian and fixed width. `bool` is one byte (0/1),
//! `f64` is the 8-byte IEEE-754 form, `string` and `bytes` carry a `u32`
//! length prefix, `list` a `u32` element count, `optional` a one-byte presence
//! tag, records are their fields in declaration order with no padding, and
//! enums are a `u32` case index.

use thiserror::Error;

use crate::idl::{IdlDocument, IdlType};
use crate::value::Value;

/// Upper bound on elements of a list whose element type encodes to zero bytes.
const MAX_ZERO_SIZED_ELEMENTS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("value does not conform to {0}")]
    NonConformant(String),
    #[error("input truncated at offset {0}")]
    Truncated(usize),
    #[error("malformed tag at offset {0}")]
    MalformedTag(usize),
    #[error("declared length at offset {0} exceeds remaining input")]
    LengthOverflow(usize),
    #[error("invalid UTF-8 in string at offset {0}")]
    InvalidUtf8(usize),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
}

pub fn encode_value(v: &Value, t: &IdlType, doc: &IdlDocument) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    encode_into(&mut out, v, t, doc)?;
    Ok(out)
}

/// Appends the encoding of `v` to `out`. On error `out` may hold a partial encoding.
pub fn encode_into(out: &mut Vec<u8>, v: &Value, t: &IdlType, doc: &IdlDocument) -> Result<(), CodecError> {
    let nonconformant = || CodecError::NonConformant(t.to_string());
    match (v, t) {
        (Value::Bool(b), IdlType::Bool) => out.push(u8::from(*b)),
        (Value::I32(n), IdlType::I32) => out.extend_from_slice(&n.to_le_bytes()),
        (Value::I64(n), IdlType::I64) => out.extend_from_slice(&n.to_le_bytes()),
        (Value::F64(n), IdlType::F64) => out.extend_from_slice(&n.to_bits().to_le_bytes()),
        (Value::Str(s), IdlType::String) => put_len_prefixed(out, s.as_bytes(), t)?,
        (Value::Bytes(b), IdlType::Bytes) => put_len_prefixed(out, b, t)?,
        (Value::Opt(None), IdlType::Optional(_)) => out.push(0),
        (Value::Opt(Some(inner)), IdlType::Optional(ty)) => {
            out.push(1);
            encode_into(out, inner, ty, doc)?;
        }
        (Value::List(items), IdlType::List(ty)) => {
            let count = u32::try_from(items.len()).map_err(|_| nonconformant())?;
            out.extend_from_slice(&count.to_le_bytes());
            for item in items {
                encode_into(out, item, ty, doc)?;
            }
        }
        (Value::Record(fields), IdlType::Record(name)) => {
            let def = doc.record(name).ok_or_else(nonconformant)?;
            if fields.len() != def.fields.len() {
                return Err(nonconformant());
            }
            for fd in &def.fields {
                let fv = fields.get(&fd.name).ok_or_else(nonconformant)?;
                encode_into(out, fv, &fd.ty, doc)?;
            }
        }
        (Value::Enum(i), IdlType::Enum(name)) => {
            let def = doc.enum_def(name).ok_or_else(nonconformant)?;
            if *i as usize >= def.cases.len() {
                return Err(nonconformant());
            }
            out.extend_from_slice(&i.to_le_bytes());
        }
        _ => return Err(nonconformant()),
    }
    Ok(())
}

fn put_len_prefixed(out: &mut Vec<u8>, data: &[u8], t: &IdlType) -> Result<(), CodecError> {
    let len = u32::try_from(data.len()).map_err(|_| CodecError::NonConformant(t.to_string()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(data);
    Ok(())
}

/// Decodes one value from the front of `bytes`, returning it together with
/// the number of bytes consumed. Anything after that offset is left to the caller.
pub fn decode_value(bytes: &[u8], t: &IdlType, doc: &IdlDocument) -> Result<(Value, usize), CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let v = r.value(t, doc)?;
    Ok((v, r.pos))
}

/// Like [`decode_value`] but rejects trailing bytes.
pub fn decode_exact(bytes: &[u8], t: &IdlType, doc: &IdlDocument) -> Result<Value, CodecError> {
    let (v, used) = decode_value(bytes, t, doc)?;
    if used != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - used));
    }
    Ok(v)
}

/// Cursor over an input buffer used by the codec and by message-body parsers.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn len_prefixed(&mut self) -> Result<&'a [u8], CodecError> {
        let at = self.pos;
        let len = self.u32()? as usize;
        if len > self.remaining() {
            return Err(CodecError::LengthOverflow(at));
        }
        self.take(len)
    }

    pub fn string(&mut self) -> Result<String, CodecError> {
        let at = self.pos;
        let raw = self.len_prefixed()?;
        String::from_utf8(raw.to_vec()).map_err(|_| CodecError::InvalidUtf8(at))
    }

    pub fn value(&mut self, t: &IdlType, doc: &IdlDocument) -> Result<Value, CodecError> {
        let at = self.pos;
        Ok(match t {
            IdlType::Bool => match self.take(1)?[0] {
                0 => Value::Bool(false),
                1 => Value::Bool(true),
                _ => return Err(CodecError::MalformedTag(at)),
            },
            IdlType::I32 => Value::I32(i32::from_le_bytes(self.array()?)),
            IdlType::I64 => Value::I64(i64::from_le_bytes(self.array()?)),
            IdlType::F64 => Value::F64(f64::from_bits(u64::from_le_bytes(self.array()?))),
            IdlType::String => Value::Str(self.string()?),
            IdlType::Bytes => Value::Bytes(self.len_prefixed()?.to_vec()),
            IdlType::Optional(inner) => match self.take(1)?[0] {
                0 => Value::Opt(None),
                1 => Value::Opt(Some(Box::new(self.value(inner, doc)?))),
                _ => return Err(CodecError::MalformedTag(at)),
            },
            IdlType::List(inner) => {
                let count = self.u32()? as usize;
                let min = min_encoded_len(inner, doc);
                let fits = match self.remaining().checked_div(min) {
                    Some(room) => count <= room,
                    None => count <= MAX_ZERO_SIZED_ELEMENTS,
                };
                if !fits {
                    return Err(CodecError::LengthOverflow(at));
                }
                let mut items = Vec::with_capacity(count);
                for _ in 0..count {
                    items.push(self.value(inner, doc)?);
                }
                Value::List(items)
            }
            IdlType::Record(name) => {
                let def = doc
                    .record(name)
                    .ok_or_else(|| CodecError::NonConformant(t.to_string()))?;
                let mut fields = std::collections::BTreeMap::new();
                for fd in &def.fields {
                    fields.insert(fd.name.clone(), self.value(&fd.ty, doc)?);
                }
                Value::Record(fields)
            }
            IdlType::Enum(name) => {
                let def = doc
                    .enum_def(name)
                    .ok_or_else(|| CodecError::NonConformant(t.to_string()))?;
                let idx = self.u32()?;
                if idx as usize >= def.cases.len() {
                    return Err(CodecError::MalformedTag(at));
                }
                Value::Enum(idx)
            }
        })
    }
}

/// Smallest number of bytes any value of `t` can encode to.
fn min_encoded_len(t: &IdlType, doc: &IdlDocument) -> usize {
    match t {
        IdlType::Bool | IdlType::Optional(_) => 1,
        IdlType::I32 | IdlType::String | IdlType::Bytes | IdlType::List(_) | IdlType::Enum(_) => 4,
        IdlType::I64 | IdlType::F64 => 8,
        IdlType::Record(name) => doc
            .record(name)
            .map(|r| r.fields.iter().map(|f| min_encoded_len(&f.ty, doc)).sum())
            .unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idl::parse_idl;

    fn empty() -> IdlDocument {
        IdlDocument::default()
    }

    #[test]
    fn fixed_layouts() {
        let doc = empty();
        assert_eq!(encode_value(&Value::I32(7), &IdlType::I32, &doc).unwrap(), [7, 0, 0, 0]);
        assert_eq!(
            encode_value(&Value::str("ab"), &IdlType::String, &doc).unwrap(),
            [2, 0, 0, 0, 0x61, 0x62]
        );
        assert_eq!(
            encode_value(&Value::none(), &IdlType::optional(IdlType::I32), &doc).unwrap(),
            [0]
        );
        assert_eq!(decode_exact(&[7, 0, 0, 0], &IdlType::I32, &doc).unwrap(), Value::I32(7));
    }

    #[test]
    fn decode_errors() {
        let doc = parse_idl("enum E { a, b }").unwrap();
        let opt = IdlType::optional(IdlType::I32);
        assert_eq!(decode_value(&[1], &opt, &doc), Err(CodecError::Truncated(1)));
        assert_eq!(decode_value(&[2], &opt, &doc), Err(CodecError::MalformedTag(0)));
        assert_eq!(decode_value(&[2], &IdlType::Bool, &doc), Err(CodecError::MalformedTag(0)));
        assert_eq!(
            decode_value(&[2, 0, 0, 0], &IdlType::Enum("E".into()), &doc),
            Err(CodecError::MalformedTag(0))
        );
        assert_eq!(
            decode_value(&[9, 0, 0, 0, b'a'], &IdlType::String, &doc),
            Err(CodecError::LengthOverflow(0))
        );
        assert_eq!(
            decode_value(&[0xff, 0xff, 0xff, 0xff], &IdlType::list(IdlType::I64), &doc),
            Err(CodecError::LengthOverflow(0))
        );
        assert_eq!(
            decode_value(&[1, 0, 0, 0, 0xff], &IdlType::String, &doc),
            Err(CodecError::InvalidUtf8(0))
        );
        assert_eq!(decode_value(&[7, 0], &IdlType::I32, &doc), Err(CodecError::Truncated(0)));
    }

    #[test]
    fn trailing_bytes_reported_as_offset() {
        let doc = empty();
        let (v, used) = decode_value(&[7, 0, 0, 0, 0xaa, 0xbb], &IdlType::I32, &doc).unwrap();
        assert_eq!((v, used), (Value::I32(7), 4));
        assert_eq!(
            decode_exact(&[7, 0, 0, 0, 0xaa], &IdlType::I32, &doc),
            Err(CodecError::TrailingBytes(1))
        );
    }

    #[test]
    fn nonconformant_rejected() {
        let doc = parse_idl("record P { a: i32; }").unwrap();
        let p = IdlType::Record("P".into());
        assert!(matches!(
            encode_value(&Value::str("x"), &IdlType::I32, &doc),
            Err(CodecError::NonConformant(_))
        ));
        assert!(matches!(
            encode_value(&Value::record([("b", Value::I32(1))]), &p, &doc),
            Err(CodecError::NonConformant(_))
        ));
    }

    #[test]
    fn record_fields_in_declaration_order() {
        let doc = parse_idl("record P { z: i32; a: bool; }").unwrap();
        let v = Value::record([("a", Value::Bool(true)), ("z", Value::I32(1))]);
        let bytes = encode_value(&v, &IdlType::Record("P".into()), &doc).unwrap();
        assert_eq!(bytes, [1, 0, 0, 0, 1]);
    }

    #[test]
    fn zero_sized_list_elements() {
        let doc = parse_idl("record Unit {}").unwrap();
        let t = IdlType::list(IdlType::Record("Unit".into()));
        let v = Value::list((0..5).map(|_| Value::record(Vec::<(String, Value)>::new())));
        let bytes = encode_value(&v, &t, &doc).unwrap();
        assert_eq!(bytes, [5, 0, 0, 0]);
        assert_eq!(decode_exact(&bytes, &t, &doc).unwrap(), v);
    }
}

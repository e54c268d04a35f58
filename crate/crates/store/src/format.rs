//! On-disk framing shared by `log.v1` and `snapshot.v1`.
//!
//! Both files start with a single version byte followed by records framed as
//! `u32 length | u32 CRC-32 | payload`, little-endian.
//!
//! Log payload: `u64 txn id | u32 op count | ops`, where each op is
//! `u8 tag (1 = put, 2 = delete) | str kind | bytes key [| bytes value]`.
//!
//! Snapshot payloads are `u8 1 | str kind | bytes key | bytes value` for each
//! entry in key order, terminated by `u8 2 | u64 entry count | u64 last txn id`.

use crate::RecordKey;

pub const FORMAT_VERSION: u8 = 1;
pub const FRAME_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Put(RecordKey, Vec<u8>),
    Delete(RecordKey),
}

const TAG_PUT: u8 = 1;
const TAG_DELETE: u8 = 2;
pub const SNAP_ENTRY: u8 = 1;
pub const SNAP_END: u8 = 2;

pub fn frame_record(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Outcome of reading one framed record at `offset`.
pub enum Framed<'a> {
    Record { payload: &'a [u8], next: usize },
    End,
    /// Torn or corrupt data starting at the given offset.
    Invalid(&'static str),
}

pub fn read_record(buf: &[u8], offset: usize) -> Framed<'_> {
    if offset == buf.len() {
        return Framed::End;
    }
    if buf.len() - offset < FRAME_HEADER {
        return Framed::Invalid("partial record header");
    }
    let len = u32::from_le_bytes(buf[offset..offset + 4].try_into().expect("4 bytes")) as usize;
    let crc = u32::from_le_bytes(buf[offset + 4..offset + 8].try_into().expect("4 bytes"));
    let start = offset + FRAME_HEADER;
    if buf.len() - start < len {
        return Framed::Invalid("partial record payload");
    }
    let payload = &buf[start..start + len];
    if crc32fast::hash(payload) != crc {
        return Framed::Invalid("checksum mismatch");
    }
    Framed::Record { payload, next: start + len }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

pub fn put_key(out: &mut Vec<u8>, key: &RecordKey) {
    put_bytes(out, key.kind.as_bytes());
    put_bytes(out, &key.key);
}

pub fn put_value(out: &mut Vec<u8>, v: &[u8]) {
    put_bytes(out, v);
}

pub fn encode_txn(txn_id: u64, ops: &[Op]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&txn_id.to_le_bytes());
    out.extend_from_slice(&(ops.len() as u32).to_le_bytes());
    for op in ops {
        match op {
            Op::Put(k, v) => {
                out.push(TAG_PUT);
                put_key(&mut out, k);
                put_bytes(&mut out, v);
            }
            Op::Delete(k) => {
                out.push(TAG_DELETE);
                put_key(&mut out, k);
            }
        }
    }
    out
}

pub struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return None;
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn bytes(&mut self) -> Option<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn key(&mut self) -> Option<RecordKey> {
        let kind = String::from_utf8(self.bytes()?.to_vec()).ok()?;
        let key = self.bytes()?.to_vec();
        Some(RecordKey { kind, key })
    }
}

pub fn decode_txn(payload: &[u8]) -> Option<(u64, Vec<Op>)> {
    let mut c = Cursor::new(payload);
    let id = c.u64()?;
    let count = c.u32()? as usize;
    let mut ops = Vec::with_capacity(count.min(payload.len()));
    for _ in 0..count {
        match c.u8()? {
            TAG_PUT => {
                let k = c.key()?;
                let v = c.bytes()?.to_vec();
                ops.push(Op::Put(k, v));
            }
            TAG_DELETE => ops.push(Op::Delete(c.key()?)),
            _ => return None,
        }
    }
    c.at_end().then_some((id, ops))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn txn_round_trip() {
        let ops = vec![
            Op::Put(RecordKey::new("Student", b"S1".to_vec()), b"v".to_vec()),
            Op::Delete(RecordKey::new("Unit", b"CS101".to_vec())),
        ];
        let payload = encode_txn(7, &ops);
        assert_eq!(decode_txn(&payload), Some((7, ops)));
        assert_eq!(decode_txn(&payload[..payload.len() - 1]), None);
    }

    #[test]
    fn frame_detects_corruption() {
        let mut f = frame_record(b"hello");
        assert!(matches!(read_record(&f, 0), Framed::Record { next: 13, .. }));
        f[10] ^= 1;
        assert!(matches!(read_record(&f, 0), Framed::Invalid("checksum mismatch")));
        assert!(matches!(read_record(&f[..6], 0), Framed::Invalid(_)));
        assert!(matches!(read_record(&f[..10], 0), Framed::Invalid(_)));
    }
}

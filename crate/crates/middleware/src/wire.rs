//! Framed request/reply messages.
//!
//! Every frame is an 18-byte header followed by the body:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `FCIS`               |
//! | 4      | 1    | version (1)                |
//! | 5      | 1    | kind                       |
//! | 6      | 8    | request id, little-endian  |
//! | 14     | 4    | body length, little-endian |

use std::fmt;
use std::io::{self, Read};

use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt};

pub const MAGIC: [u8; 4] = *b"FCIS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;
pub const DEFAULT_BODY_CAP: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Request = 0,
    Reply = 1,
    ErrorReply = 2,
    Ping = 3,
    Pong = 4,
    Resolve = 5,
    ResolveReply = 6,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::Request,
        MessageKind::Reply,
        MessageKind::ErrorReply,
        MessageKind::Ping,
        MessageKind::Pong,
        MessageKind::Resolve,
        MessageKind::ResolveReply,
    ];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub kind: MessageKind,
    pub request_id: u64,
    pub body: Vec<u8>,
}

impl WireMessage {
    pub fn new(kind: MessageKind, request_id: u64, body: Vec<u8>) -> Self {
        WireMessage { kind, request_id, body }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("stream ended inside a frame")]
    Truncated,
    #[error("body of {len} bytes exceeds cap of {cap}")]
    BodyTooLarge { len: usize, cap: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn frame(msg: &WireMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.body.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.kind as u8);
    out.extend_from_slice(&msg.request_id.to_le_bytes());
    out.extend_from_slice(&(msg.body.len() as u32).to_le_bytes());
    out.extend_from_slice(&msg.body);
    out
}

struct Header {
    kind: MessageKind,
    request_id: u64,
    body_len: usize,
}

fn parse_header(h: &[u8; HEADER_LEN], cap: usize) -> Result<Header, WireError> {
    let magic: [u8; 4] = h[0..4].try_into().expect("slice of 4");
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    if h[4] != VERSION {
        return Err(WireError::UnsupportedVersion(h[4]));
    }
    let kind = MessageKind::from_u8(h[5]).ok_or(WireError::UnknownKind(h[5]))?;
    let request_id = u64::from_le_bytes(h[6..14].try_into().expect("slice of 8"));
    let body_len = u32::from_le_bytes(h[14..18].try_into().expect("slice of 4")) as usize;
    if body_len > cap {
        return Err(WireError::BodyTooLarge { len: body_len, cap });
    }
    Ok(Header { kind, request_id, body_len })
}

/// Reads exactly one frame from a blocking source. Returns `Ok(None)` on a
/// clean end of stream at a frame boundary.
pub fn unframe<R: Read>(src: &mut R, cap: usize) -> Result<Option<WireMessage>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match src.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(WireError::Truncated),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let h = parse_header(&header, cap)?;
    let mut body = vec![0u8; h.body_len];
    src.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated,
        _ => WireError::Io(e),
    })?;
    Ok(Some(WireMessage { kind: h.kind, request_id: h.request_id, body }))
}

/// Async counterpart of [`unframe`].
pub async fn read_frame<R: AsyncRead + Unpin>(src: &mut R, cap: usize) -> Result<Option<WireMessage>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match src.read(&mut header[filled..]).await? {
            0 if filled == 0 => return Ok(None),
            0 => return Err(WireError::Truncated),
            n => filled += n,
        }
    }
    let h = parse_header(&header, cap)?;
    let mut body = vec![0u8; h.body_len];
    src.read_exact(&mut body).await.map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Truncated,
        _ => WireError::Io(e),
    })?;
    Ok(Some(WireMessage { kind: h.kind, request_id: h.request_id, body }))
}

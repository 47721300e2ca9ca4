use std::io::{Read, Write};

use embed_router_core::{Embedding, ExpertEntry, HIDDEN_DIM};

use crate::grammar::layout;
use crate::{ErrorCode, WireError};

pub const MAGIC: [u8; 4] = *b"EMRT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 11;
pub const MAX_PAYLOAD: usize = 16 << 20;
/// Sentinel for an absent expert or class id.
pub const NO_ID: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Register = 1,
    Match = 2,
    MatchResult = 3,
    Error = 4,
    Ping = 5,
    Pong = 6,
}

impl MsgType {
    pub const ALL: [MsgType; 6] = [
        MsgType::Register,
        MsgType::Match,
        MsgType::MatchResult,
        MsgType::Error,
        MsgType::Ping,
        MsgType::Pong,
    ];

    pub fn from_u8(b: u8) -> Option<MsgType> {
        MsgType::ALL.into_iter().find(|t| *t as u8 == b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchRequest {
    pub request_id: u64,
    pub embedding: Vec<f32>,
    /// Minimum coarse score; -1 disables rejection.
    pub threshold: f32,
    pub want_fine: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    pub request_id: u64,
    /// [`NO_ID`] when rejected.
    pub expert_id: u32,
    /// [`NO_ID`] when rejected or not requested.
    pub class_id: u32,
    pub rejected: bool,
    /// Best coarse cosine score.
    pub score: f32,
}

impl MatchResult {
    pub fn expert(&self) -> Option<u32> {
        (self.expert_id != NO_ID).then_some(self.expert_id)
    }

    pub fn class(&self) -> Option<u32> {
        (self.class_id != NO_ID).then_some(self.class_id)
    }
}

/// Server state reported in PONG: entry count, and whether the preceding
/// REGISTER replaced an existing expert.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Status {
    pub entries: u32,
    pub replaced: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    /// Centroids travel as `f32`, like query embeddings.
    Register(ExpertEntry),
    Match(MatchRequest),
    MatchResult(MatchResult),
    Error { code: ErrorCode, message: String },
    Ping,
    Pong(Status),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Register(_) => MsgType::Register,
            Message::Match(_) => MsgType::Match,
            Message::MatchResult(_) => MsgType::MatchResult,
            Message::Error { .. } => MsgType::Error,
            Message::Ping => MsgType::Ping,
            Message::Pong(_) => MsgType::Pong,
        }
    }

    fn payload(&self) -> Result<Vec<u8>, WireError> {
        let mut p = Vec::new();
        match self {
            Message::Register(e) => {
                p.extend(e.expert_id.to_le_bytes());
                p.extend((e.class_centroids.len() as u32).to_le_bytes());
                for c in std::iter::once(&e.dataset_centroid).chain(&e.class_centroids) {
                    put_f32s(&mut p, &c.to_f32());
                }
            }
            Message::Match(m) => {
                if m.embedding.len() != HIDDEN_DIM {
                    return Err(WireError::Protocol(format!(
                        "embedding has {} values, expected {HIDDEN_DIM}",
                        m.embedding.len()
                    )));
                }
                p.extend(m.request_id.to_le_bytes());
                put_f32s(&mut p, &m.embedding);
                p.extend(m.threshold.to_le_bytes());
                p.push(m.want_fine as u8);
            }
            Message::MatchResult(r) => {
                p.extend(r.request_id.to_le_bytes());
                p.extend(r.expert_id.to_le_bytes());
                p.extend(r.class_id.to_le_bytes());
                p.push(r.rejected as u8);
                p.extend(r.score.to_le_bytes());
            }
            Message::Error { code, message } => {
                p.extend(code.0.to_le_bytes());
                p.extend(message.as_bytes());
            }
            Message::Ping => {}
            Message::Pong(s) => {
                p.extend(s.entries.to_le_bytes());
                p.push(s.replaced as u8);
            }
        }
        if p.len() > MAX_PAYLOAD {
            return Err(WireError::Size(p.len()));
        }
        Ok(p)
    }

    fn from_payload(t: MsgType, p: &[u8]) -> Result<Message, WireError> {
        if let Some(n) = layout(t).fixed_len() {
            if p.len() != n {
                return Err(WireError::Protocol(format!(
                    "{t:?} payload is {} bytes, expected {n}",
                    p.len()
                )));
            }
        }
        let mut c = Cursor(p);
        let msg = match t {
            MsgType::Register => {
                let expert_id = c.u32()?;
                let n = c.u32()? as usize;
                let expected = 8 + (n + 1) * HIDDEN_DIM * 4;
                if n == 0 || p.len() != expected {
                    return Err(WireError::Protocol(format!(
                        "REGISTER with {n} classes must be {expected} bytes, got {}",
                        p.len()
                    )));
                }
                let mut vec = || {
                    Embedding::from_f32(&c.f32s(HIDDEN_DIM)?)
                        .map_err(|e| WireError::Protocol(e.to_string()))
                };
                let dataset_centroid = vec()?;
                let class_centroids = (0..n).map(|_| vec()).collect::<Result<_, _>>()?;
                let entry = ExpertEntry::new(expert_id, dataset_centroid, class_centroids)
                    .map_err(|e| WireError::Protocol(e.to_string()))?;
                Message::Register(entry)
            }
            MsgType::Match => Message::Match(MatchRequest {
                request_id: c.u64()?,
                embedding: c.f32s(HIDDEN_DIM)?,
                threshold: c.f32()?,
                want_fine: c.flag()?,
            }),
            MsgType::MatchResult => Message::MatchResult(MatchResult {
                request_id: c.u64()?,
                expert_id: c.u32()?,
                class_id: c.u32()?,
                rejected: c.flag()?,
                score: c.f32()?,
            }),
            MsgType::Error => {
                if p.len() < 2 {
                    return Err(WireError::Protocol("ERROR payload lacks a code".into()));
                }
                let code = ErrorCode(c.u16()?);
                let message = std::str::from_utf8(c.rest())
                    .map_err(|_| WireError::Protocol("ERROR message is not UTF-8".into()))?
                    .to_string();
                Message::Error { code, message }
            }
            MsgType::Ping => Message::Ping,
            MsgType::Pong => Message::Pong(Status {
                entries: c.u32()?,
                replaced: c.flag()?,
            }),
        };
        Ok(msg)
    }
}

fn put_f32s(p: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        p.extend(x.to_le_bytes());
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.0.len() < n {
            return Err(WireError::Protocol("payload ends inside a field".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, WireError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, WireError> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn flag(&mut self) -> Result<bool, WireError> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(WireError::Protocol(format!("flag byte {b} is neither 0 nor 1"))),
        }
    }

    fn rest(&mut self) -> &'a [u8] {
        std::mem::take(&mut self.0)
    }
}

/// Serializes `msg` into one frame.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, WireError> {
    let payload = msg.payload()?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.push(msg.msg_type() as u8);
    out.extend((payload.len() as u32).to_le_bytes());
    out.extend(payload);
    Ok(out)
}

/// Validates a header and returns the message type and payload length.
fn parse_header(h: &[u8]) -> Result<(MsgType, usize), WireError> {
    let magic_len = h.len().min(4);
    if h[..magic_len] != MAGIC[..magic_len] {
        return Err(WireError::Protocol("bad magic".into()));
    }
    if h.len() < HEADER_LEN {
        return Err(WireError::Truncation {
            needed: HEADER_LEN,
            available: h.len(),
        });
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != VERSION {
        return Err(WireError::Protocol(format!("unsupported version {version}")));
    }
    let t = MsgType::from_u8(h[6])
        .ok_or_else(|| WireError::Protocol(format!("unknown message type {}", h[6])))?;
    let len = u32::from_le_bytes(h[7..11].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::Size(len));
    }
    Ok((t, len))
}

/// Decodes the frame at the start of `bytes`; returns the message and the
/// number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Message, usize), WireError> {
    let (t, len) = parse_header(&bytes[..bytes.len().min(HEADER_LEN)])?;
    let end = HEADER_LEN + len;
    if bytes.len() < end {
        return Err(WireError::Truncation {
            needed: end,
            available: bytes.len(),
        });
    }
    Ok((Message::from_payload(t, &bytes[HEADER_LEN..end])?, end))
}

/// Reads one frame. A stream that ends before the first byte yields
/// [`WireError::Closed`].
pub fn read_message<R: Read>(r: &mut R) -> Result<Message, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(r, &mut header)?;
    if got == 0 {
        return Err(WireError::Closed);
    }
    let (t, len) = parse_header(&header[..got])?;
    let mut payload = vec![0u8; len];
    let got = read_full(r, &mut payload)?;
    if got < len {
        return Err(WireError::Truncation {
            needed: HEADER_LEN + len,
            available: HEADER_LEN + got,
        });
    }
    Message::from_payload(t, &payload)
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, WireError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<(), WireError> {
    w.write_all(&encode_frame(msg)?)?;
    w.flush()?;
    Ok(())
}

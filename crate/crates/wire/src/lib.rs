//! Binary protocol and registry server for embedding-only matching.
//!
//! Frames are `EMRT` | version u16 | type u8 | payload length u32 | payload,
//! little-endian throughout. Clients send only 128-dim `f32` embeddings;
//! [`grammar`] describes every payload layout and the codec enforces it.

mod client;
mod codec;
pub mod grammar;
mod server;

use std::fmt;

use thiserror::Error;

pub use client::{client_match, Client};
pub use codec::{
    decode_frame, encode_frame, read_message, write_message, MatchRequest, MatchResult, Message,
    MsgType, Status, HEADER_LEN, MAGIC, MAX_PAYLOAD, NO_ID, VERSION,
};
pub use server::{Server, ServerHandle};

pub const DEFAULT_PORT: u16 = 7431;
/// Environment variable overriding the server address.
pub const ADDR_ENV: &str = "EMBED_ROUTER_ADDR";

/// `$EMBED_ROUTER_ADDR`, else `127.0.0.1:7431`.
pub fn default_addr() -> String {
    std::env::var(ADDR_ENV).unwrap_or_else(|_| format!("127.0.0.1:{DEFAULT_PORT}"))
}

/// Error code carried by an ERROR frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ErrorCode(pub u16);

impl ErrorCode {
    pub const PROTOCOL: ErrorCode = ErrorCode(1);
    pub const TRUNCATED: ErrorCode = ErrorCode(2);
    pub const TOO_LARGE: ErrorCode = ErrorCode(3);
    pub const EMPTY_INDEX: ErrorCode = ErrorCode(4);
    pub const INVALID_REQUEST: ErrorCode = ErrorCode(5);
    pub const INTERNAL: ErrorCode = ErrorCode(6);

    pub fn name(self) -> Option<&'static str> {
        Some(match self {
            ErrorCode::PROTOCOL => "Protocol",
            ErrorCode::TRUNCATED => "Truncated",
            ErrorCode::TOO_LARGE => "TooLarge",
            ErrorCode::EMPTY_INDEX => "EmptyIndex",
            ErrorCode::INVALID_REQUEST => "InvalidRequest",
            ErrorCode::INTERNAL => "Internal",
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "code {}", self.0),
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("truncated frame: needed {needed} bytes, got {available}")]
    Truncation { needed: usize, available: usize },
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    Size(usize),
    #[error("timed out")]
    Timeout,
    #[error("connection closed")]
    Closed,
    #[error("server error {code}: {message}")]
    Server { code: ErrorCode, message: String },
    #[error("cannot connect to {addr}: {source}")]
    Connect {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(std::io::Error),
}

impl WireError {
    /// The code a server answers with when a frame fails to decode.
    pub fn code(&self) -> ErrorCode {
        match self {
            WireError::Protocol(_) => ErrorCode::PROTOCOL,
            WireError::Truncation { .. } => ErrorCode::TRUNCATED,
            WireError::Size(_) => ErrorCode::TOO_LARGE,
            WireError::Server { code, .. } => *code,
            _ => ErrorCode::INTERNAL,
        }
    }
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        use std::io::ErrorKind::*;
        match e.kind() {
            WouldBlock | TimedOut => WireError::Timeout,
            _ => WireError::Io(e),
        }
    }
}

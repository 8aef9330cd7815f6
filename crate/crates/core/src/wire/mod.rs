//! Frame codec and message catalog.
//!
//! ```text
//! +----------------+---------+----------+-----------------+
//! | length (u32 BE)| version | msg_type | payload         |
//! | payload bytes  | 0x01    | 1 byte   | `length` bytes  |
//! +----------------+---------+----------+-----------------+
//! ```
//!
//! Payloads are compact JSON with a fixed field order. Big integers are the
//! unsigned big-endian magnitude in unpadded base64url, session ids are 32
//! lowercase hex digits. The decoder re-encodes what it parsed and rejects
//! the frame unless the bytes match, so every message has exactly one
//! encoding. `SETUP_ACK` has an empty payload.

pub mod golden;
mod payload;

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::compare::{CompareMessage, SessionId};
use crate::he::PublicKeys;
use crate::levelsite::TraversalToken;
use crate::tree::LevelSlice;

pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
pub const MAX_PAYLOAD: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    KeyMaterial = 0x01,
    Setup = 0x02,
    SetupAck = 0x03,
    ClassifyStart = 0x04,
    Traversal = 0x05,
    BlindedValue = 0x10,
    BitVector = 0x11,
    MaskedSequence = 0x12,
    ShareV = 0x13,
    ShareW = 0x14,
    Result = 0x20,
    Error = 0x7F,
}

impl MsgType {
    pub const ALL: [MsgType; 12] = [
        MsgType::KeyMaterial,
        MsgType::Setup,
        MsgType::SetupAck,
        MsgType::ClassifyStart,
        MsgType::Traversal,
        MsgType::BlindedValue,
        MsgType::BitVector,
        MsgType::MaskedSequence,
        MsgType::ShareV,
        MsgType::ShareW,
        MsgType::Result,
        MsgType::Error,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| *t as u8 == b)
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::KeyMaterial => "KEY_MATERIAL",
            MsgType::Setup => "SETUP",
            MsgType::SetupAck => "SETUP_ACK",
            MsgType::ClassifyStart => "CLASSIFY_START",
            MsgType::Traversal => "TRAVERSAL",
            MsgType::BlindedValue => "BLINDED_VALUE",
            MsgType::BitVector => "BIT_VECTOR",
            MsgType::MaskedSequence => "MASKED_SEQUENCE",
            MsgType::ShareV => "SHARE_V",
            MsgType::ShareW => "SHARE_W",
            MsgType::Result => "RESULT",
            MsgType::Error => "ERROR",
        }
    }
}

/// Error codes carried in `ERROR` messages.
pub mod codes {
    pub const PROTOCOL: u16 = 1;
    pub const BAD_INDEX: u16 = 2;
    pub const DOWNSTREAM: u16 = 3;
    pub const COMPARISON: u16 = 4;
    pub const SETUP: u16 = 5;
    pub const NOT_READY: u16 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    KeyMaterial(PublicKeys),
    Setup(LevelSlice),
    SetupAck,
    ClassifyStart(TraversalToken),
    Traversal(TraversalToken),
    Compare(CompareMessage),
    Result { session: SessionId, enc_class: crate::he::Ciphertext },
    Error { session: SessionId, code: u16, text: String },
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::KeyMaterial(_) => MsgType::KeyMaterial,
            Message::Setup(_) => MsgType::Setup,
            Message::SetupAck => MsgType::SetupAck,
            Message::ClassifyStart(_) => MsgType::ClassifyStart,
            Message::Traversal(_) => MsgType::Traversal,
            Message::Compare(m) => match m {
                CompareMessage::BlindedValue { .. } => MsgType::BlindedValue,
                CompareMessage::BitVector { .. } => MsgType::BitVector,
                CompareMessage::MaskedSequence { .. } => MsgType::MaskedSequence,
                CompareMessage::ShareV { .. } => MsgType::ShareV,
                CompareMessage::ShareW { .. } => MsgType::ShareW,
            },
            Message::Result { .. } => MsgType::Result,
            Message::Error { .. } => MsgType::Error,
        }
    }

    pub fn session(&self) -> Option<SessionId> {
        match self {
            Message::KeyMaterial(_) | Message::Setup(_) | Message::SetupAck => None,
            Message::ClassifyStart(t) | Message::Traversal(t) => Some(t.session),
            Message::Compare(m) => Some(m.session()),
            Message::Result { session, .. } | Message::Error { session, .. } => Some(*session),
        }
    }

    pub fn error(session: SessionId, code: u16, text: impl Into<String>) -> Self {
        Message::Error { session, code, text: text.into() }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("frame declares {declared} payload bytes but carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("payload of {0} bytes exceeds the 64 MiB limit")]
    TooLarge(usize),
    #[error("unsupported frame version {0:#04x}")]
    Version(u8),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("malformed {kind} payload: {reason}")]
    Payload { kind: &'static str, reason: String },
    #[error("{0} payload is not in canonical form")]
    NonCanonical(&'static str),
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_payload(msg: &Message) -> Vec<u8> {
    payload::encode(msg)
}

/// Serializes one message into a complete frame.
pub fn encode(msg: &Message) -> Vec<u8> {
    let body = payload::encode(msg);
    assert!(body.len() <= MAX_PAYLOAD, "payload exceeds frame limit");
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.push(VERSION);
    out.push(msg.msg_type() as u8);
    out.extend_from_slice(&body);
    out
}

/// Validates the 6-byte header and returns `(payload_len, type)`.
fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(usize, MsgType), WireError> {
    let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]) as usize;
    if header[4] != VERSION {
        return Err(WireError::Version(header[4]));
    }
    let kind = MsgType::from_byte(header[5]).ok_or(WireError::UnknownType(header[5]))?;
    if len > MAX_PAYLOAD {
        return Err(WireError::TooLarge(len));
    }
    Ok((len, kind))
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
    let header: &[u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(WireError::Truncated { need: HEADER_LEN, have: bytes.len() })?;
    let (len, kind) = parse_header(header)?;
    let actual = bytes.len() - HEADER_LEN;
    if actual != len {
        return Err(WireError::LengthMismatch { declared: len, actual });
    }
    payload::decode(kind, &bytes[HEADER_LEN..])
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<(), WireError> {
    w.write_all(&encode(msg))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from a stream. A clean end of stream before the first
/// header byte is [`WireError::Closed`].
pub fn read_message<R: Read>(r: &mut R) -> Result<Message, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(WireError::Closed),
            Ok(0) => return Err(WireError::Truncated { need: HEADER_LEN, have: filled }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (len, kind) = parse_header(&header)?;
    let mut body = Vec::new();
    let got = r.take(len as u64).read_to_end(&mut body)?;
    if got != len {
        return Err(WireError::Truncated { need: len, have: got });
    }
    payload::decode(kind, &body)
}

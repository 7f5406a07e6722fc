//! Length-prefixed frame codec.
//!
//! Every frame on the wire is a 4-byte big-endian length header followed by
//! exactly that many bytes of a compact UTF-8 JSON document.

use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::error::{ErrorClass, ErrorInfo};

/// Upper bound on the encoded document size of one frame.
pub const MAX_FRAME_BYTES: usize = 8 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Init,
    Request,
    Result,
    Event,
    Finish,
}

/// Operations a blueprint may request from the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "llm.invoke")]
    LlmInvoke,
    #[serde(rename = "kb.query")]
    KbQuery,
    #[serde(rename = "tool.call")]
    ToolCall,
    #[serde(rename = "user.send")]
    UserSend,
    #[serde(rename = "user.wait")]
    UserWait,
    #[serde(rename = "log")]
    Log,
}

impl Op {
    pub const ALL: [Op; 6] = [
        Op::LlmInvoke,
        Op::KbQuery,
        Op::ToolCall,
        Op::UserSend,
        Op::UserWait,
        Op::Log,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::LlmInvoke => "llm.invoke",
            Op::KbQuery => "kb.query",
            Op::ToolCall => "tool.call",
            Op::UserSend => "user.send",
            Op::UserWait => "user.wait",
            Op::Log => "log",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub id: u64,
    pub kind: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<Op>,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl Frame {
    pub fn init(payload: Value) -> Self {
        Frame::bare(0, FrameKind::Init, payload)
    }

    pub fn request(id: u64, op: Op, payload: Value) -> Self {
        Frame {
            op: Some(op),
            ..Frame::bare(id, FrameKind::Request, payload)
        }
    }

    pub fn result_ok(id: u64, payload: Value) -> Self {
        Frame {
            ok: Some(true),
            ..Frame::bare(id, FrameKind::Result, payload)
        }
    }

    pub fn result_err(id: u64, error: ErrorInfo) -> Self {
        Frame {
            ok: Some(false),
            error: Some(error),
            ..Frame::bare(id, FrameKind::Result, Value::Null)
        }
    }

    /// Engine-originated event; always id 0.
    pub fn event(payload: Value) -> Self {
        Frame::bare(0, FrameKind::Event, payload)
    }

    pub fn finish(id: u64, payload: Value) -> Self {
        Frame::bare(id, FrameKind::Finish, payload)
    }

    fn bare(id: u64, kind: FrameKind, payload: Value) -> Self {
        Frame {
            id,
            kind,
            op: None,
            payload,
            ok: None,
            error: None,
        }
    }

    /// Checks the per-kind shape rules.
    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            FrameKind::Request => {
                if self.op.is_none() {
                    return Err("request frame without op".into());
                }
                if self.ok.is_some() || self.error.is_some() {
                    return Err("request frame carries result fields".into());
                }
            }
            FrameKind::Result => match (self.ok, &self.error) {
                (Some(true), None) | (Some(false), Some(_)) => {}
                (None, _) => return Err("result frame without ok".into()),
                (Some(true), Some(_)) => return Err("ok result carries an error".into()),
                (Some(false), None) => return Err("failed result without error".into()),
            },
            FrameKind::Init | FrameKind::Event | FrameKind::Finish => {
                if self.op.is_some() || self.ok.is_some() || self.error.is_some() {
                    return Err(format!("{:?} frame carries request/result fields", self.kind));
                }
                if self.kind == FrameKind::Event && self.id != 0 {
                    return Err("event frames use id 0".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("frame of {len} bytes exceeds the {MAX_FRAME_BYTES}-byte limit")]
    Oversize { len: usize },
    #[error("truncated frame: expected {expected} bytes, stream ended")]
    Truncated { expected: usize },
    #[error("malformed frame document: {0}")]
    Malformed(String),
    #[error("invalid frame: {0}")]
    Invalid(String),
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CodecError {
    /// Oversize on encode is a caller mistake; everything else is a protocol fault.
    pub fn to_error_info(&self) -> ErrorInfo {
        let class = match self {
            CodecError::Oversize { .. } => ErrorClass::Validation,
            _ => ErrorClass::Protocol,
        };
        ErrorInfo::new(class, self.to_string())
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self, CodecError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
    }
}

/// Serialize a frame into header + body. Nothing is produced on error.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, CodecError> {
    frame.validate().map_err(CodecError::Invalid)?;
    let body = serde_json::to_vec(frame).map_err(|e| CodecError::Malformed(e.to_string()))?;
    prefix(body)
}

/// Decode one frame from the front of `bytes`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), CodecError> {
    let mut cursor = bytes;
    let frame = read_frame(&mut cursor).map_err(|e| match e {
        CodecError::Closed => CodecError::Truncated { expected: 4 },
        other => other,
    })?;
    Ok((frame, bytes.len() - cursor.len()))
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &Frame) -> Result<(), CodecError> {
    let bytes = encode_frame(frame)?;
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

/// Read the next frame. A clean end-of-stream before any header byte is
/// reported as [`CodecError::Closed`].
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Frame, CodecError> {
    let body = read_body(reader)?;
    let frame: Frame =
        serde_json::from_slice(&body).map_err(|e| CodecError::Malformed(e.to_string()))?;
    frame.validate().map_err(CodecError::Invalid)?;
    Ok(frame)
}

/// Write an arbitrary JSON document with the same length-prefixed framing.
pub fn write_document<W: Write>(writer: &mut W, doc: &Value) -> Result<(), CodecError> {
    let body = serde_json::to_vec(doc).map_err(|e| CodecError::Malformed(e.to_string()))?;
    writer.write_all(&prefix(body)?)?;
    writer.flush()?;
    Ok(())
}

pub fn read_document<R: Read>(reader: &mut R) -> Result<Value, CodecError> {
    let body = read_body(reader)?;
    serde_json::from_slice(&body).map_err(|e| CodecError::Malformed(e.to_string()))
}

fn prefix(body: Vec<u8>) -> Result<Vec<u8>, CodecError> {
    if body.len() > MAX_FRAME_BYTES {
        return Err(CodecError::Oversize { len: body.len() });
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

fn read_body<R: Read>(reader: &mut R) -> Result<Vec<u8>, CodecError> {
    let mut header = [0u8; 4];
    let mut filled = 0;
    while filled < header.len() {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(CodecError::Closed),
            Ok(0) => return Err(CodecError::Truncated { expected: 4 }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(CodecError::Oversize { len });
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => CodecError::Truncated { expected: len },
        _ => CodecError::Io(e),
    })?;
    Ok(body)
}

//! Engine ↔ blueprint wire protocol.
//!
//! A connection carries [`Frame`]s in both directions. The engine sends one
//! `init` frame, then answers every blueprint `request` with exactly one
//! `result` carrying the same id. The blueprint ends the exchange with a
//! `finish` frame; nothing follows it on either side.

mod error;
mod frame;
mod llm;
mod schema;

pub use error::{classify_error, ErrorClass, ErrorInfo, RawFailure};
pub use frame::{
    decode_frame, encode_frame, read_document, read_frame, write_document, write_frame,
    CodecError, Frame, FrameKind, Op, MAX_FRAME_BYTES,
};
pub use llm::{
    validate_tool_name, ChatMessage, FinishReason, LlmRequest, LlmResponse, Role, ToolCall,
    ToolSpec, Usage,
};
pub use schema::{validate_args, SchemaViolation};

/// Socket address of the engine endpoint, injected into the sandbox.
pub const ENV_RPC_ADDR: &str = "AGENT_RPC_ADDR";
pub const ENV_SESSION_ID: &str = "AGENT_SESSION_ID";
pub const ENV_EXEC_ID: &str = "AGENT_EXEC_ID";
/// `1` selects deterministic-test mode (zero backoff, seeded ids).
pub const ENV_DETERMINISTIC: &str = "AGENT_DETERMINISTIC";

/// Checks request/result correlation over a recorded conversation: every
/// request id is answered by exactly one result and no result is unsolicited.
pub fn check_correlation(frames: &[Frame]) -> Result<(), String> {
    use std::collections::BTreeMap;
    let mut open: BTreeMap<u64, usize> = BTreeMap::new();
    for frame in frames {
        match frame.kind {
            FrameKind::Request => *open.entry(frame.id).or_default() += 1,
            FrameKind::Result => match open.get_mut(&frame.id) {
                Some(n) if *n > 0 => *n -= 1,
                _ => return Err(format!("result {} without a pending request", frame.id)),
            },
            _ => {}
        }
    }
    match open.iter().find(|(_, n)| **n > 0) {
        Some((id, _)) => Err(format!("request {id} never answered")),
        None => Ok(()),
    }
}

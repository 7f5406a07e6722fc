//! Control layer: request validation, sessions and dialogue history,
//! execution launch and resume, and SSE streaming, served by `agentd`.

pub mod daemon;
pub mod gateway;
pub mod registry;
pub mod server;
pub mod services;
pub mod session;
pub mod sse;

pub use gateway::{EventStream, Gateway, GatewayError, RejectCode};
pub use registry::AgentRegistry;
pub use session::{DialogueEntry, Role, SessionState, SessionStatus};
pub use sse::SseRecord;

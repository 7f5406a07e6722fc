//! Blueprint side of the wire protocol, spoken with raw frames.

use std::os::unix::net::UnixStream;
use std::time::Duration;

use agent_core::protocol::{
    read_frame, write_frame, CodecError, ErrorInfo, Frame, FrameKind, LlmRequest, LlmResponse, Op,
    ENV_RPC_ADDR,
};
use serde_json::{json, Value};

pub const EXIT_MISSING_ENV: i32 = 64;
pub const EXIT_PROTOCOL: i32 = 65;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug)]
pub enum CallError {
    /// The engine answered with `ok: false`.
    Engine(ErrorInfo),
    /// The connection itself failed.
    Protocol(String),
}

impl std::fmt::Display for CallError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CallError::Engine(e) => write!(f, "{e}"),
            CallError::Protocol(m) => write!(f, "protocol failure: {m}"),
        }
    }
}

impl From<CodecError> for CallError {
    fn from(e: CodecError) -> Self {
        CallError::Protocol(e.to_string())
    }
}

pub struct Client {
    stream: UnixStream,
    next_id: u64,
    init: Value,
}

impl Client {
    /// Connect to the engine named by `AGENT_RPC_ADDR` and consume `init`.
    /// Errors carry the process exit code to use.
    pub fn connect() -> Result<Client, i32> {
        let addr = std::env::var(ENV_RPC_ADDR).map_err(|_| EXIT_MISSING_ENV)?;
        let stream = UnixStream::connect(&addr).map_err(|_| EXIT_PROTOCOL)?;
        stream
            .set_read_timeout(Some(HANDSHAKE_TIMEOUT))
            .map_err(|_| EXIT_PROTOCOL)?;
        let mut client = Client {
            stream,
            next_id: 1,
            init: Value::Null,
        };
        let init = read_frame(&mut client.stream).map_err(|_| EXIT_PROTOCOL)?;
        if init.kind != FrameKind::Init {
            return Err(EXIT_PROTOCOL);
        }
        client.stream.set_read_timeout(None).map_err(|_| EXIT_PROTOCOL)?;
        client.init = init.payload;
        Ok(client)
    }

    pub fn init(&self) -> &Value {
        &self.init
    }

    pub fn toggle(&self, name: &str) -> bool {
        self.init["toggles"][name].as_bool().unwrap_or(true)
    }

    /// Raw stream access, for fixtures that deliberately misbehave.
    pub fn stream(&mut self) -> &mut UnixStream {
        &mut self.stream
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn call(&mut self, op: Op, payload: Value) -> Result<Value, CallError> {
        let id = self.next_id();
        write_frame(&mut self.stream, &Frame::request(id, op, payload))?;
        let result = read_frame(&mut self.stream)?;
        if result.kind != FrameKind::Result || result.id != id {
            return Err(CallError::Protocol(format!(
                "expected result {id}, got {:?} {}",
                result.kind, result.id
            )));
        }
        match (result.ok, result.error) {
            (Some(true), _) => Ok(result.payload),
            (_, Some(error)) => Err(CallError::Engine(error)),
            _ => Err(CallError::Protocol("result without outcome".into())),
        }
    }

    pub fn llm(&mut self, request: &LlmRequest) -> Result<LlmResponse, CallError> {
        let payload = serde_json::to_value(request).expect("request serializes");
        let value = self.call(Op::LlmInvoke, payload)?;
        serde_json::from_value(value).map_err(|e| CallError::Protocol(e.to_string()))
    }

    pub fn tool(&mut self, name: &str, args: Value) -> Result<Value, CallError> {
        self.call(Op::ToolCall, json!({"name": name, "args": args}))
    }

    pub fn kb(&mut self, kb_id: &str, query: &str, top_k: usize) -> Result<Vec<Value>, CallError> {
        let value = self.call(
            Op::KbQuery,
            json!({"kb_id": kb_id, "query": query, "top_k": top_k}),
        )?;
        Ok(value["hits"].as_array().cloned().unwrap_or_default())
    }

    pub fn send_user(&mut self, content: &str) -> Result<(), CallError> {
        self.call(Op::UserSend, json!({"content": content})).map(|_| ())
    }

    /// Next user message, or `None` when the user side has closed.
    pub fn wait_user(&mut self) -> Result<Option<String>, CallError> {
        let value = self.call(Op::UserWait, json!({}))?;
        Ok(value["content"].as_str().map(str::to_string))
    }

    pub fn log(&mut self, payload: Value) -> Result<(), CallError> {
        self.call(Op::Log, payload).map(|_| ())
    }

    /// Send the terminal frame. Returns the exit code for the process.
    pub fn finish(mut self, status: &str, output: Value) -> i32 {
        let id = self.next_id();
        let frame = Frame::finish(id, json!({"status": status, "output": output}));
        match write_frame(&mut self.stream, &frame) {
            Ok(()) => 0,
            Err(_) => EXIT_PROTOCOL,
        }
    }
}

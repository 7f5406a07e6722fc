//! Blueprint execution: launch a sandboxed blueprint, serve its protocol
//! requests, enforce quotas, retry recoverable provider failures and close
//! out a telemetry record for every execution.

mod quota;
mod retry;
mod telemetry;

use std::collections::BTreeMap;
use std::io;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::{json, Value};

pub use quota::{Breach, QuotaGuard, QuotaUsage, SAMPLE_INTERVAL};
pub use retry::{backoff_delay, with_retry, RetryEntry, RetryOutcome};
pub use telemetry::{
    CapturedStream, ExecExit, TelemetryEvent, TelemetryLog, TelemetryRecord, TELEMETRY_VERSION,
};

use crate::config::{AgentConfig, RetryPolicy};
use crate::protocol::{
    classify_error, read_frame, write_frame, CodecError, ErrorInfo, Frame, FrameKind, LlmRequest,
    Op, RawFailure, ENV_DETERMINISTIC, ENV_EXEC_ID, ENV_RPC_ADDR, ENV_SESSION_ID,
};
use crate::providers::{KbError, KnowledgeStore, LlmProvider, ToolRegistry};
use crate::runtime::{Clock, IdGenerator};
use crate::sandbox::{
    spawn, Captured, DependencyCatalog, IsolationReport, NetworkPolicy, ReapOutcome,
    RuntimeCatalog, SandboxProcess, SandboxSpec,
};

/// Time a blueprint gets to exit on its own after sending `finish`.
pub const FINISH_GRACE: Duration = Duration::from_secs(2);

const POLL: Duration = Duration::from_millis(20);

/// The user side of an execution: where `user.send` goes and where
/// `user.wait` blocks.
pub trait Conversation {
    /// Deliver an assistant message. `seq` is the telemetry sequence number
    /// the op will be recorded under.
    fn send(&mut self, seq: u64, content: &str) -> Result<(), ErrorInfo>;

    /// Block until the user replies; `None` when the user side has closed.
    fn wait(&mut self, seq: u64) -> Option<String>;

    /// Called after every op is answered and once when the record closes.
    fn observe(&mut self, _event: &ExecutionEvent<'_>) {}
}

/// Conversation with no user: messages are dropped and waits return `None`.
#[derive(Debug, Default)]
pub struct NullConversation;

impl Conversation for NullConversation {
    fn send(&mut self, _seq: u64, _content: &str) -> Result<(), ErrorInfo> {
        Ok(())
    }

    fn wait(&mut self, _seq: u64) -> Option<String> {
        None
    }
}

#[derive(Debug)]
pub enum ExecutionEvent<'a> {
    Op {
        event: &'a TelemetryEvent,
        request: &'a Frame,
        result: &'a Frame,
    },
    Closed {
        record: &'a TelemetryRecord,
    },
}

#[derive(Debug, Clone)]
pub struct ExecutorConfig {
    pub data_dir: PathBuf,
    pub runtimes: RuntimeCatalog,
    pub catalog: Option<DependencyCatalog>,
    pub network: NetworkPolicy,
    pub deterministic: bool,
}

impl ExecutorConfig {
    /// A relative `data_dir` is made absolute: sandboxed children reach the
    /// engine socket inside it from another working directory.
    pub fn new(data_dir: impl Into<PathBuf>, runtimes: RuntimeCatalog) -> Self {
        let data_dir = data_dir.into();
        ExecutorConfig {
            data_dir: std::path::absolute(&data_dir).unwrap_or(data_dir),
            runtimes,
            catalog: None,
            network: NetworkPolicy::EngineSocketOnly,
            deterministic: false,
        }
    }
}

/// Per-execution providers. The model provider is owned by one execution;
/// knowledge bases and tools may be shared.
pub struct ExecutionServices {
    pub llm: Box<dyn LlmProvider>,
    pub knowledge: Arc<KnowledgeStore>,
    pub tools: Arc<ToolRegistry>,
}

pub struct LaunchRequest<'a> {
    pub config: &'a AgentConfig,
    pub session_id: String,
    /// Context snapshot delivered in the `init` frame.
    pub snapshot: Value,
    pub services: ExecutionServices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecState {
    Launching,
    Running,
    WaitingUser,
    Terminating,
    Done,
}

#[derive(Debug, Clone)]
pub struct ExecutionOutcome {
    pub record: TelemetryRecord,
    /// The `output` field of the blueprint's `finish` frame, if it sent one.
    pub output: Option<Value>,
}

impl ExecutionOutcome {
    pub fn is_ok(&self) -> bool {
        self.record.exit == ExecExit::Ok
    }
}

#[derive(Debug)]
pub struct Executor {
    config: ExecutorConfig,
    telemetry: Arc<TelemetryLog>,
    ids: Arc<IdGenerator>,
    clock: Arc<Clock>,
}

impl Executor {
    pub fn new(config: ExecutorConfig) -> Self {
        let telemetry = Arc::new(TelemetryLog::new(config.data_dir.join("telemetry.log")));
        let ids = Arc::new(IdGenerator::new(config.deterministic));
        let clock = Arc::new(Clock::new(config.deterministic));
        Executor {
            config,
            telemetry,
            ids,
            clock,
        }
    }

    pub fn config(&self) -> &ExecutorConfig {
        &self.config
    }

    pub fn telemetry(&self) -> &Arc<TelemetryLog> {
        &self.telemetry
    }

    pub fn runtime_tags(&self) -> Vec<&str> {
        self.config.runtimes.tags()
    }

    /// Launch and serve to completion.
    pub fn run(&self, request: LaunchRequest<'_>, conversation: &mut dyn Conversation) -> ExecutionOutcome {
        match self.launch(request) {
            Ok(handle) => handle.serve(conversation),
            Err(outcome) => {
                conversation.observe(&ExecutionEvent::Closed {
                    record: &outcome.record,
                });
                outcome
            }
        }
    }

    /// Spawn the sandbox, accept its protocol connection and send `init`.
    /// On failure the returned outcome's record has already been written.
    pub fn launch(&self, request: LaunchRequest<'_>) -> Result<ExecutionHandle, ExecutionOutcome> {
        let LaunchRequest {
            config,
            session_id,
            snapshot,
            services,
        } = request;
        let exec_id = self.ids.next_id();
        let started_at = self.clock.now();
        let fail = |error: ErrorInfo| {
            let record = self.failure_record(&exec_id, config, &session_id, started_at, error);
            Err(ExecutionOutcome {
                record,
                output: None,
            })
        };

        if self.config.runtimes.get(&config.blueprint.runtime).is_none() {
            return fail(ErrorInfo::validation(format!(
                "runtime `{}` is not supported",
                config.blueprint.runtime
            )));
        }

        let run_dir = self.config.data_dir.join("run").join(&exec_id);
        let listener = match self.bind(&run_dir, &exec_id) {
            Ok(listener) => listener,
            Err(e) => return fail(ErrorInfo::fatal(format!("cannot bind engine socket: {e}"))),
        };
        let socket_path = listener.as_ref().map(|(_, p)| p.clone());

        let mut env = BTreeMap::from([
            (ENV_SESSION_ID.to_string(), session_id.clone()),
            (ENV_EXEC_ID.to_string(), exec_id.clone()),
        ]);
        if let Some(path) = &socket_path {
            env.insert(ENV_RPC_ADDR.to_string(), path.display().to_string());
        }
        if self.config.deterministic {
            env.insert(ENV_DETERMINISTIC.to_string(), "1".to_string());
        }
        let spec = SandboxSpec {
            runtime: config.blueprint.runtime.clone(),
            entry_file: config.blueprint.entry_file.clone(),
            blueprint_dir: config.blueprint.dir.clone(),
            scratch_dir: self.config.data_dir.join("scratch").join(&exec_id),
            env,
            network: self.config.network,
            limits: config.limits.clone(),
        };
        let process = match spawn(&spec, &self.config.runtimes, self.config.catalog.as_ref()) {
            Ok(process) => process,
            Err(e) => {
                let _ = std::fs::remove_dir_all(&run_dir);
                return fail(e.to_error_info());
            }
        };
        let guard = QuotaGuard::start(process.pgid(), config.limits.clone());

        let mut handle = ExecutionHandle {
            exec_id,
            session_id,
            agent_id: config.agent_id.clone(),
            default_model: config.model.model.clone(),
            retry: config.retry,
            deterministic: self.config.deterministic,
            state: ExecState::Launching,
            process: Some(process),
            guard: Some(guard),
            stream: None,
            frames: None,
            services,
            pending: BTreeMap::new(),
            last_id: 0,
            events: Vec::new(),
            retries: Vec::new(),
            started_at,
            run_dir,
            telemetry: self.telemetry.clone(),
            clock: self.clock.clone(),
        };

        let Some((listener, _)) = listener else {
            handle.state = ExecState::Running;
            return Ok(handle);
        };
        match handle.accept(&listener) {
            Ok(stream) => {
                let init = Frame::init(json!({
                    "session_id": handle.session_id,
                    "exec_id": handle.exec_id,
                    "agent_id": handle.agent_id,
                    "snapshot": snapshot,
                    "toggles": config.toggles,
                    "policy": config.policy,
                }));
                let mut writer = match stream.try_clone() {
                    Ok(writer) => writer,
                    Err(e) => {
                        return Err(handle.close(Closing::Error(ErrorInfo::fatal(e.to_string())), None))
                    }
                };
                if let Err(e) = write_frame(&mut writer, &init) {
                    let error = classify_error(&RawFailure::ProtocolViolation(format!(
                        "init not delivered: {e}"
                    )));
                    return Err(handle.close(Closing::Error(error), None));
                }
                handle.frames = Some(spawn_reader(stream));
                handle.stream = Some(writer);
                handle.state = ExecState::Running;
                Ok(handle)
            }
            Err(closing) => Err(handle.close(closing, None)),
        }
    }

    fn bind(&self, run_dir: &Path, exec_id: &str) -> io::Result<Option<(UnixListener, PathBuf)>> {
        if self.config.network == NetworkPolicy::Deny {
            return Ok(None);
        }
        std::fs::create_dir_all(run_dir)?;
        std::fs::set_permissions(run_dir, std::fs::Permissions::from_mode(0o700))?;
        let mut path = run_dir.join("rpc.sock");
        // sockaddr_un paths are limited to 108 bytes.
        if path.as_os_str().len() > 100 {
            path = std::env::temp_dir().join(format!("agent-{exec_id}.sock"));
        }
        let _ = std::fs::remove_file(&path);
        let listener = UnixListener::bind(&path)?;
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o600))?;
        listener.set_nonblocking(true)?;
        Ok(Some((listener, path)))
    }

    fn failure_record(
        &self,
        exec_id: &str,
        config: &AgentConfig,
        session_id: &str,
        started_at: DateTime<Utc>,
        error: ErrorInfo,
    ) -> TelemetryRecord {
        let record = TelemetryRecord {
            v: TELEMETRY_VERSION,
            exec_id: exec_id.to_string(),
            agent_id: config.agent_id.clone(),
            session_id: session_id.to_string(),
            started_at,
            ended_at: self.clock.now(),
            exit: ExecExit::Error { error },
            exit_status: None,
            quota_usage: QuotaUsage::default(),
            isolation: None,
            events: Vec::new(),
            stdout: empty_stream(),
            stderr: empty_stream(),
            retries: Vec::new(),
        };
        if let Err(e) = self.telemetry.append(&record) {
            tracing::error!(exec_id, "telemetry write failed: {e}");
        }
        record
    }
}

fn empty_stream() -> CapturedStream {
    CapturedStream {
        text: String::new(),
        truncated: false,
    }
}

fn stream_record(captured: &Captured) -> CapturedStream {
    CapturedStream {
        text: captured.to_text(),
        truncated: captured.truncated,
    }
}

fn spawn_reader(stream: UnixStream) -> Receiver<Result<Frame, CodecError>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut stream = stream;
        loop {
            let item = read_frame(&mut stream);
            let done = item.is_err();
            if tx.send(item).is_err() || done {
                break;
            }
        }
    });
    rx
}

enum Closing {
    Finished(Value),
    Error(ErrorInfo),
    Quota(Breach),
    /// Connection ended or was never made; decide from the exit status.
    Exited { connected: bool },
}

/// A live blueprint execution.
pub struct ExecutionHandle {
    exec_id: String,
    session_id: String,
    agent_id: String,
    default_model: String,
    retry: RetryPolicy,
    deterministic: bool,
    state: ExecState,
    process: Option<SandboxProcess>,
    guard: Option<QuotaGuard>,
    stream: Option<UnixStream>,
    frames: Option<Receiver<Result<Frame, CodecError>>>,
    services: ExecutionServices,
    /// Requests received and not yet answered, by id.
    pending: BTreeMap<u64, Op>,
    last_id: u64,
    events: Vec<TelemetryEvent>,
    retries: Vec<RetryEntry>,
    started_at: DateTime<Utc>,
    run_dir: PathBuf,
    telemetry: Arc<TelemetryLog>,
    clock: Arc<Clock>,
}

impl std::fmt::Debug for ExecutionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExecutionHandle")
            .field("exec_id", &self.exec_id)
            .field("session_id", &self.session_id)
            .field("state", &self.state)
            .field("pending", &self.pending)
            .finish()
    }
}

#[derive(Deserialize)]
struct KbQuery {
    kb_id: String,
    query: String,
    #[serde(default = "default_top_k")]
    top_k: usize,
}

fn default_top_k() -> usize {
    3
}

#[derive(Deserialize)]
struct ToolCallRequest {
    name: String,
    #[serde(default)]
    args: Value,
}

#[derive(Deserialize)]
struct UserSend {
    content: String,
}

struct Answer {
    result: Frame,
    summary: Value,
    attempts: u32,
}

impl ExecutionHandle {
    pub fn exec_id(&self) -> &str {
        &self.exec_id
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn state(&self) -> ExecState {
        self.state
    }

    pub fn pid(&self) -> Option<u32> {
        self.process.as_ref().map(SandboxProcess::pid)
    }

    pub fn isolation(&self) -> Option<IsolationReport> {
        self.process.as_ref().map(SandboxProcess::isolation)
    }

    fn guard(&self) -> &QuotaGuard {
        self.guard.as_ref().expect("guard lives until close")
    }

    fn accept(&mut self, listener: &UnixListener) -> Result<UnixStream, Closing> {
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false).map_err(|e| Closing::Error(ErrorInfo::fatal(e.to_string())))?;
                    return Ok(stream);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {}
                Err(e) => return Err(Closing::Error(ErrorInfo::fatal(format!("accept failed: {e}")))),
            }
            if let Some(breach) = self.guard().breach() {
                return Err(Closing::Quota(breach));
            }
            let process = self.process.as_mut().expect("process lives until close");
            if process.try_wait().ok().flatten().is_some() {
                return Err(Closing::Exited { connected: false });
            }
            std::thread::sleep(Duration::from_millis(2));
        }
    }

    /// Serve requests until finish, a fatal error or a quota kill; then
    /// reap the sandbox and write the telemetry record.
    pub fn serve(mut self, conversation: &mut dyn Conversation) -> ExecutionOutcome {
        let closing = self.serve_loop(conversation);
        let outcome = self.close(closing, Some(conversation));
        outcome
    }

    fn serve_loop(&mut self, conversation: &mut dyn Conversation) -> Closing {
        let Some(frames) = self.frames.take() else {
            return self.wait_without_connection();
        };
        loop {
            if let Some(breach) = self.guard().breach() {
                return Closing::Quota(breach);
            }
            let frame = match frames.recv_timeout(POLL) {
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) | Ok(Err(CodecError::Closed)) => {
                    return Closing::Exited { connected: true }
                }
                Ok(Err(e)) => {
                    return Closing::Error(classify_error(&RawFailure::ProtocolViolation(
                        e.to_string(),
                    )))
                }
                Ok(Ok(frame)) => frame,
            };
            if !self.guard().count_frame() {
                return Closing::Quota(self.guard().breach().expect("frame quota tripped"));
            }
            if frame.id <= self.last_id {
                return Closing::Error(classify_error(&RawFailure::ProtocolViolation(format!(
                    "frame id {} does not increase past {}",
                    frame.id, self.last_id
                ))));
            }
            self.last_id = frame.id;
            match (frame.kind, frame.op) {
                (FrameKind::Request, Some(op)) => {
                    if let Err(closing) = self.handle_request(frame, op, conversation) {
                        return closing;
                    }
                }
                (FrameKind::Finish, _) => {
                    let seq = self.events.len() as u64 + 1;
                    self.events.push(TelemetryEvent {
                        seq,
                        op: "finish".into(),
                        request_id: frame.id,
                        ok: true,
                        attempts: 1,
                        duration_ms: 0,
                        summary: frame.payload.clone(),
                    });
                    return Closing::Finished(frame.payload);
                }
                (kind, _) => {
                    return Closing::Error(classify_error(&RawFailure::ProtocolViolation(format!(
                        "blueprint may not send {kind:?} frames"
                    ))))
                }
            }
        }
    }

    fn wait_without_connection(&mut self) -> Closing {
        loop {
            if let Some(breach) = self.guard().breach() {
                return Closing::Quota(breach);
            }
            let process = self.process.as_mut().expect("process lives until close");
            if process.try_wait().ok().flatten().is_some() {
                return Closing::Exited { connected: false };
            }
            std::thread::sleep(POLL);
        }
    }

    fn handle_request(
        &mut self,
        request: Frame,
        op: Op,
        conversation: &mut dyn Conversation,
    ) -> Result<(), Closing> {
        let seq = self.events.len() as u64 + 1;
        let started = Instant::now();
        self.pending.insert(request.id, op);
        let answer = match op {
            Op::LlmInvoke => self.llm_invoke(&request),
            Op::KbQuery => self.kb_query(&request),
            Op::ToolCall => self.tool_call(&request),
            Op::UserSend => user_send(&request, seq, conversation),
            Op::UserWait => {
                self.state = ExecState::WaitingUser;
                self.guard().pause();
                let reply = conversation.wait(seq);
                self.guard().resume();
                self.state = ExecState::Running;
                Answer {
                    result: Frame::result_ok(
                        request.id,
                        json!({"content": reply, "closed": reply.is_none()}),
                    ),
                    summary: json!({"content": reply}),
                    attempts: 1,
                }
            }
            Op::Log => Answer {
                result: Frame::result_ok(request.id, json!({})),
                summary: request.payload.clone(),
                attempts: 1,
            },
        };
        let write = match self.stream.as_mut() {
            Some(stream) => write_frame(stream, &answer.result),
            None => Err(CodecError::Closed),
        };
        self.pending.remove(&request.id);
        let event = TelemetryEvent {
            seq,
            op: op.as_str().to_string(),
            request_id: request.id,
            ok: answer.result.ok == Some(true),
            attempts: answer.attempts,
            duration_ms: started.elapsed().as_millis() as u64,
            summary: answer.summary,
        };
        self.events.push(event);
        conversation.observe(&ExecutionEvent::Op {
            event: self.events.last().expect("just pushed"),
            request: &request,
            result: &answer.result,
        });
        match write {
            Ok(()) => Ok(()),
            // The blueprint is gone; the exit status decides the outcome.
            Err(_) => Err(Closing::Exited { connected: true }),
        }
    }

    fn retried<T>(&mut self, op_id: u64, call: impl FnMut(u32) -> Result<T, ErrorInfo>) -> RetryOutcome<T> {
        let outcome = with_retry(&self.retry, self.deterministic, std::thread::sleep, call);
        for (i, failure) in outcome.failures.iter().enumerate() {
            self.retries.push(RetryEntry {
                op_id,
                attempt: i as u32 + 1,
                class: failure.class,
            });
        }
        outcome
    }

    fn llm_invoke(&mut self, request: &Frame) -> Answer {
        let mut llm_request: LlmRequest = match serde_json::from_value(request.payload.clone()) {
            Ok(r) => r,
            Err(e) => return rejected(request.id, ErrorInfo::validation(format!("bad llm request: {e}"))),
        };
        if llm_request.model.is_empty() {
            llm_request.model = self.default_model.clone();
        }
        if let Err(e) = llm_request.validate() {
            return rejected(request.id, ErrorInfo::validation(e));
        }
        let mut llm = std::mem::replace(&mut self.services.llm, Box::new(Unavailable));
        let outcome = self.retried(request.id, |_| llm.invoke(&llm_request));
        self.services.llm = llm;
        match outcome.result {
            Ok(response) => Answer {
                summary: json!({
                    "model": llm_request.model,
                    "content": response.message.content,
                    "tool_calls": response.tool_calls,
                    "finish_reason": response.finish_reason,
                    "usage": response.usage,
                }),
                result: Frame::result_ok(
                    request.id,
                    serde_json::to_value(&response).expect("response serializes"),
                ),
                attempts: outcome.attempts,
            },
            Err(error) => Answer {
                summary: json!({"model": llm_request.model, "error": error}),
                result: Frame::result_err(request.id, error),
                attempts: outcome.attempts,
            },
        }
    }

    fn kb_query(&mut self, request: &Frame) -> Answer {
        let query: KbQuery = match serde_json::from_value(request.payload.clone()) {
            Ok(q) => q,
            Err(e) => return rejected(request.id, ErrorInfo::validation(format!("bad kb query: {e}"))),
        };
        match self.services.knowledge.query(&query.kb_id, &query.query, query.top_k) {
            Ok(hits) => Answer {
                summary: json!({
                    "kb_id": query.kb_id,
                    "query": query.query,
                    "hits": hits.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>(),
                }),
                result: Frame::result_ok(request.id, json!({"hits": hits})),
                attempts: 1,
            },
            Err(e) => {
                let error = match e {
                    KbError::NotFound(_) => ErrorInfo::validation(format!("not_found: {e}")),
                    _ => ErrorInfo::validation(e.to_string()),
                };
                Answer {
                    summary: json!({"kb_id": query.kb_id, "query": query.query, "error": error}),
                    result: Frame::result_err(request.id, error),
                    attempts: 1,
                }
            }
        }
    }

    fn tool_call(&mut self, request: &Frame) -> Answer {
        let call: ToolCallRequest = match serde_json::from_value(request.payload.clone()) {
            Ok(c) => c,
            Err(e) => return rejected(request.id, ErrorInfo::validation(format!("bad tool call: {e}"))),
        };
        let tools = self.services.tools.clone();
        let outcome = self.retried(request.id, |_| tools.dispatch(&call.name, &call.args));
        match outcome.result {
            Ok(doc) => Answer {
                summary: json!({"name": call.name, "args": call.args, "result": doc}),
                result: Frame::result_ok(request.id, doc),
                attempts: outcome.attempts,
            },
            Err(error) => Answer {
                summary: json!({"name": call.name, "args": call.args, "error": error}),
                result: Frame::result_err(request.id, error),
                attempts: outcome.attempts,
            },
        }
    }

    fn close(mut self, closing: Closing, conversation: Option<&mut dyn Conversation>) -> ExecutionOutcome {
        self.state = ExecState::Terminating;
        if let Some(stream) = &self.stream {
            let _ = stream.shutdown(std::net::Shutdown::Both);
        }
        let grace = match closing {
            Closing::Finished(_) => FINISH_GRACE,
            Closing::Exited { .. } => Duration::from_millis(500),
            _ => Duration::ZERO,
        };
        let process = self.process.take().expect("process lives until close");
        let isolation = process.isolation();
        let reaped: ReapOutcome = process.reap(grace);
        let guard = self.guard.take().expect("guard lives until close");
        // A breach detected while the process was dying still wins.
        let late_breach = guard.breach();
        let usage = guard.stop();
        let exit_status = reaped
            .exit_code()
            .or_else(|| reaped.signal().map(|s| -s));

        let (exit, output) = match closing {
            Closing::Finished(payload) => {
                let status = payload.get("status").and_then(Value::as_str).unwrap_or("ok");
                let exit = if status == "ok" {
                    ExecExit::Ok
                } else {
                    ExecExit::Error {
                        error: ErrorInfo::fatal(format!("blueprint finished with status `{status}`")),
                    }
                };
                (exit, Some(payload.get("output").cloned().unwrap_or(Value::Null)))
            }
            Closing::Error(error) => (ExecExit::Error { error }, None),
            Closing::Quota(breach) => (
                ExecExit::QuotaKilled {
                    dimension: breach.dimension,
                },
                None,
            ),
            Closing::Exited { connected } => match late_breach {
                Some(breach) => (
                    ExecExit::QuotaKilled {
                        dimension: breach.dimension,
                    },
                    None,
                ),
                None if !connected && reaped.exit_code() == Some(0) && self.stream.is_none() => {
                    (ExecExit::Ok, None)
                }
                None => {
                    let mut error = classify_error(&RawFailure::BlueprintExit {
                        status: reaped.exit_code(),
                    });
                    if !connected {
                        error.message.push_str(" (before the protocol handshake)");
                    }
                    (ExecExit::Error { error }, None)
                }
            },
        };

        let record = TelemetryRecord {
            v: TELEMETRY_VERSION,
            exec_id: self.exec_id.clone(),
            agent_id: self.agent_id.clone(),
            session_id: self.session_id.clone(),
            started_at: self.started_at,
            ended_at: self.clock.now().max(self.started_at),
            exit,
            exit_status,
            quota_usage: usage,
            isolation: Some(isolation),
            events: std::mem::take(&mut self.events),
            stdout: stream_record(&reaped.stdout),
            stderr: stream_record(&reaped.stderr),
            retries: std::mem::take(&mut self.retries),
        };
        if let Err(e) = self.telemetry.append(&record) {
            tracing::error!(exec_id = %self.exec_id, "telemetry write failed: {e}");
        }
        let _ = std::fs::remove_dir_all(&self.run_dir);
        self.state = ExecState::Done;
        if let Some(conversation) = conversation {
            conversation.observe(&ExecutionEvent::Closed { record: &record });
        }
        ExecutionOutcome { record, output }
    }
}

fn user_send(request: &Frame, seq: u64, conversation: &mut dyn Conversation) -> Answer {
    let message: UserSend = match serde_json::from_value(request.payload.clone()) {
        Ok(m) => m,
        Err(e) => return rejected(request.id, ErrorInfo::validation(format!("bad user.send: {e}"))),
    };
    match conversation.send(seq, &message.content) {
        Ok(()) => Answer {
            result: Frame::result_ok(request.id, json!({"delivered": true})),
            summary: json!({"content": message.content}),
            attempts: 1,
        },
        Err(error) => Answer {
            summary: json!({"content": message.content, "error": error}),
            result: Frame::result_err(request.id, error),
            attempts: 1,
        },
    }
}

fn rejected(id: u64, error: ErrorInfo) -> Answer {
    Answer {
        summary: json!({"error": error}),
        result: Frame::result_err(id, error),
        attempts: 1,
    }
}

/// Placeholder while the real provider is borrowed out for a call.
struct Unavailable;

impl LlmProvider for Unavailable {
    fn invoke(&mut self, _request: &LlmRequest) -> Result<crate::protocol::LlmResponse, ErrorInfo> {
        Err(ErrorInfo::fatal("provider unavailable"))
    }
}

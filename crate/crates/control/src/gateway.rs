//! The orchestration gateway: request validation, sessions, launching and
//! resuming executions, and relaying their events as SSE records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, MutexGuard};

use agent_core::config::AgentConfig;
use agent_core::executor::{Conversation, ExecutionEvent, Executor, LaunchRequest, TelemetryRecord};
use agent_core::protocol::ErrorInfo;
use agent_core::providers::token_estimate;
use agent_core::runtime::{Clock, IdGenerator};
use serde::Serialize;
use serde_json::{json, Value};
use subtle::ConstantTimeEq;
use thiserror::Error;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

use crate::registry::AgentRegistry;
use crate::services::ServiceFactory;
use crate::session::{load_all, DialogueEntry, NewEntry, Role, Session, SessionError, SessionState, SessionStatus};
use crate::sse::{awaiting_user, relay_close, relay_op, SseRecord};

/// Events of one posted message, ending when the session awaits the user
/// again or the execution closes.
pub type EventStream = UnboundedReceiver<SseRecord>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    NotFound,
    Unauthorized,
    Forbidden,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{code:?}: {message}")]
    Rejected { code: RejectCode, message: String },
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("execution {0} not found")]
    ExecutionNotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl From<SessionError> for GatewayError {
    fn from(e: SessionError) -> Self {
        GatewayError::Internal(e.to_string())
    }
}

fn reject(code: RejectCode, message: impl Into<String>) -> GatewayError {
    GatewayError::Rejected { code, message: message.into() }
}

#[derive(Debug, Default)]
struct Counters {
    sessions_created: AtomicU64,
    messages_accepted: AtomicU64,
    requests_rejected: AtomicU64,
    conflicts: AtomicU64,
    executions_started: AtomicU64,
    executions_finished: AtomicU64,
    executions_failed: AtomicU64,
    sse_events: AtomicU64,
}

fn bump(counter: &AtomicU64) {
    counter.fetch_add(1, Ordering::Relaxed);
}

struct Live {
    session: Session,
    sink: Option<UnboundedSender<SseRecord>>,
    reply: Option<mpsc::Sender<String>>,
}

struct Cell {
    live: Mutex<Live>,
}

impl Cell {
    fn lock(&self) -> MutexGuard<'_, Live> {
        self.live.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Shared {
    executor: Executor,
    services: Arc<dyn ServiceFactory>,
    clock: Clock,
    counters: Counters,
    threads: Mutex<Vec<std::thread::JoinHandle<()>>>,
}

impl Shared {
    fn emit(&self, live: &Live, record: SseRecord) {
        bump(&self.counters.sse_events);
        if let Some(sink) = &live.sink {
            // A client that went away does not stop the execution.
            let _ = sink.send(record);
        }
    }
}

pub struct Gateway {
    shared: Arc<Shared>,
    registry: AgentRegistry,
    sessions_dir: PathBuf,
    sessions: Mutex<BTreeMap<String, Arc<Cell>>>,
    ids: IdGenerator,
}

impl Gateway {
    /// Open the gateway over `sessions_dir`, rebuilding the session index.
    /// Sessions whose execution died with a previous server are failed.
    pub fn new(
        executor: Executor,
        registry: AgentRegistry,
        services: Arc<dyn ServiceFactory>,
        sessions_dir: &Path,
    ) -> Result<Self, GatewayError> {
        let deterministic = executor.config().deterministic;
        let clock = Clock::new(deterministic);
        let mut sessions = BTreeMap::new();
        for mut session in load_all(sessions_dir)? {
            let reason = Some("server restarted");
            if session.status() == SessionStatus::AwaitingUser {
                session.transition(SessionStatus::Running, None, reason, clock.now())?;
            }
            if session.status() == SessionStatus::Running {
                session.transition(SessionStatus::Failed, None, reason, clock.now())?;
            }
            let id = session.id().to_string();
            sessions.insert(id, Arc::new(Cell { live: Mutex::new(Live { session, sink: None, reply: None }) }));
        }
        Ok(Gateway {
            shared: Arc::new(Shared {
                executor,
                services,
                clock,
                counters: Counters::default(),
                threads: Mutex::new(Vec::new()),
            }),
            registry,
            sessions_dir: sessions_dir.to_path_buf(),
            sessions: Mutex::new(sessions),
            ids: IdGenerator::new(deterministic),
        })
    }

    pub fn executor(&self) -> &Executor {
        &self.shared.executor
    }

    pub fn registry(&self) -> &AgentRegistry {
        &self.registry
    }

    /// Accept iff the agent exists, the token matches (constant time) and
    /// the user is not on the agent's deny list.
    pub fn validate_request(&self, user_id: &str, agent_id: &str, token: &str) -> Result<&AgentConfig, GatewayError> {
        let verdict = self.check(user_id, agent_id, token);
        if verdict.is_err() {
            bump(&self.shared.counters.requests_rejected);
        }
        verdict
    }

    fn check(&self, user_id: &str, agent_id: &str, token: &str) -> Result<&AgentConfig, GatewayError> {
        let agent = self
            .registry
            .get(agent_id)
            .ok_or_else(|| reject(RejectCode::NotFound, format!("agent {agent_id} is not registered")))?;
        if !bool::from(agent.agent_token.as_bytes().ct_eq(token.as_bytes())) {
            return Err(reject(RejectCode::Unauthorized, "token does not match the agent"));
        }
        if agent.deny_users.contains(user_id) {
            return Err(reject(RejectCode::Forbidden, format!("user {user_id} may not use agent {agent_id}")));
        }
        Ok(agent)
    }

    fn cell(&self, session_id: &str) -> Result<Arc<Cell>, GatewayError> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(session_id)
            .cloned()
            .ok_or_else(|| GatewayError::SessionNotFound(session_id.to_string()))
    }

    /// The cell of a session after checking `token` against its agent.
    fn authorized(&self, session_id: &str, token: &str) -> Result<Arc<Cell>, GatewayError> {
        let cell = self.cell(session_id)?;
        let (user, agent) = {
            let live = cell.lock();
            let s = live.session.state();
            (s.user_id.clone(), s.agent_id.clone())
        };
        self.validate_request(&user, &agent, token)?;
        Ok(cell)
    }

    pub fn create_session(&self, user_id: &str, agent_id: &str, token: &str) -> Result<SessionState, GatewayError> {
        if user_id.is_empty() {
            return Err(GatewayError::BadRequest("user_id must not be empty".into()));
        }
        let agent = self.validate_request(user_id, agent_id, token)?;
        let mut session_id = self.ids.next_id();
        // Deterministic ids restart with the server; skip ones already on disk.
        while Session::path_in(&self.sessions_dir, &session_id).exists() {
            session_id = self.ids.next_id();
        }
        let session = Session::create(&self.sessions_dir, &session_id, user_id, agent_id, &agent.policy, self.shared.clock.now())?;
        let state = session.state().clone();
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session_id, Arc::new(Cell { live: Mutex::new(Live { session, sink: None, reply: None }) }));
        bump(&self.shared.counters.sessions_created);
        Ok(state)
    }

    pub fn session(&self, session_id: &str) -> Option<SessionState> {
        self.cell(session_id).ok().map(|c| c.lock().session.state().clone())
    }

    /// Append a user message and either launch an execution (idle session)
    /// or resolve the pending `user.wait` (awaiting_user).
    pub fn post_message(&self, session_id: &str, token: &str, content: &str) -> Result<EventStream, GatewayError> {
        let cell = self.authorized(session_id, token)?;
        let mut live = cell.lock();
        let status = live.session.status();
        match status {
            SessionStatus::Running => {
                bump(&self.shared.counters.conflicts);
                return Err(GatewayError::Conflict(format!("session {session_id} is running")));
            }
            SessionStatus::Finished | SessionStatus::Failed => {
                bump(&self.shared.counters.conflicts);
                return Err(GatewayError::Conflict(format!("session {session_id} is {}", status.as_str())));
            }
            SessionStatus::Idle | SessionStatus::AwaitingUser => {}
        }
        let now = self.shared.clock.now();
        let snapshot = live.session.assemble_context(content);
        live.session.append(NewEntry::text(Role::User, content), now)?;
        live.session.transition(SessionStatus::Running, None, None, now)?;
        bump(&self.shared.counters.messages_accepted);

        let (sink, stream) = unbounded_channel();
        live.sink = Some(sink);
        self.shared.emit(&live, SseRecord::status("running"));

        if status == SessionStatus::AwaitingUser {
            let delivered = live.reply.as_ref().is_some_and(|reply| reply.send(content.to_string()).is_ok());
            if !delivered {
                // The execution is gone; the message cannot be answered.
                fail(&self.shared, &mut live, None, ErrorInfo::fatal("execution no longer waiting"));
            }
            return Ok(stream);
        }

        let agent = self.registry.get(&live.session.state().agent_id).cloned().ok_or_else(|| {
            GatewayError::Internal(format!("agent {} disappeared from the registry", live.session.state().agent_id))
        })?;
        let (reply, replies) = mpsc::channel();
        live.reply = Some(reply);
        drop(live);

        bump(&self.shared.counters.executions_started);
        let shared = self.shared.clone();
        let session_id = session_id.to_string();
        let spawned = std::thread::Builder::new()
            .name(format!("exec-{session_id}"))
            .spawn({
                let cell = cell.clone();
                move || execute(shared, cell, agent, session_id, Value::Array(snapshot), replies)
            });
        match spawned {
            Ok(thread) => {
                let mut threads = self.shared.threads.lock().unwrap_or_else(|e| e.into_inner());
                threads.retain(|t| !t.is_finished());
                threads.push(thread);
            }
            Err(e) => fail(&self.shared, &mut cell.lock(), None, ErrorInfo::fatal(format!("cannot start execution: {e}"))),
        }
        Ok(stream)
    }

    pub fn history(&self, session_id: &str, token: &str, up_to: Option<u64>) -> Result<Vec<DialogueEntry>, GatewayError> {
        let cell = self.authorized(session_id, token)?;
        let live = cell.lock();
        Ok(live.session.state().history_up_to(up_to).to_vec())
    }

    /// The stored telemetry line of an execution, byte for byte.
    pub fn telemetry(&self, exec_id: &str, token: &str) -> Result<String, GatewayError> {
        let line = self
            .shared
            .executor
            .telemetry()
            .lookup(exec_id)
            .map_err(|e| GatewayError::Internal(e.to_string()))?
            .ok_or_else(|| GatewayError::ExecutionNotFound(exec_id.to_string()))?;
        let record: Value = serde_json::from_str(&line).map_err(|e| GatewayError::Internal(e.to_string()))?;
        let agent_id = record["agent_id"].as_str().unwrap_or_default();
        let agent = self.registry.get(agent_id).ok_or_else(|| reject(RejectCode::NotFound, format!("agent {agent_id} is not registered")))?;
        if !bool::from(agent.agent_token.as_bytes().ct_eq(token.as_bytes())) {
            bump(&self.shared.counters.requests_rejected);
            return Err(reject(RejectCode::Unauthorized, "token does not match the agent"));
        }
        Ok(line)
    }

    /// Read-only counters for monitoring.
    pub fn status(&self) -> Value {
        let mut by_status: BTreeMap<&str, u64> = SessionStatus::ALL.iter().map(|s| (s.as_str(), 0)).collect();
        for cell in self.sessions.lock().unwrap_or_else(|e| e.into_inner()).values() {
            *by_status.entry(cell.lock().session.status().as_str()).or_default() += 1;
        }
        let c = &self.shared.counters;
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        json!({
            "agents": self.registry.ids(),
            "sessions": by_status,
            "sessions_created": get(&c.sessions_created),
            "messages_accepted": get(&c.messages_accepted),
            "requests_rejected": get(&c.requests_rejected),
            "conflicts": get(&c.conflicts),
            "executions": {
                "started": get(&c.executions_started),
                "finished": get(&c.executions_finished),
                "failed": get(&c.executions_failed),
                "running": get(&c.executions_started) - get(&c.executions_finished) - get(&c.executions_failed),
            },
            "sse_events": get(&c.sse_events),
        })
    }
}

impl Drop for Gateway {
    /// Close the user side of every execution, so pending waits return
    /// `None`, then wait for the executions to end.
    fn drop(&mut self) {
        for cell in self.sessions.lock().unwrap_or_else(|e| e.into_inner()).values() {
            cell.lock().reply = None;
        }
        let threads = std::mem::take(&mut *self.shared.threads.lock().unwrap_or_else(|e| e.into_inner()));
        for thread in threads {
            let _ = thread.join();
        }
    }
}

/// Fail a running session without a telemetry record, e.g. when its
/// providers cannot be built.
fn fail(shared: &Shared, live: &mut Live, exec_id: Option<&str>, error: ErrorInfo) {
    if let Err(e) = live.session.transition(SessionStatus::Failed, exec_id, Some(&error.message), shared.clock.now()) {
        tracing::error!("cannot record failure: {e}");
    }
    bump(&shared.counters.executions_failed);
    shared.emit(live, SseRecord::new("error", json!({"error": error})));
    shared.emit(live, SseRecord::status("failed"));
    shared.emit(live, SseRecord::new("done", json!({"exit": "error"})));
    live.sink = None;
    live.reply = None;
}

fn execute(
    shared: Arc<Shared>,
    cell: Arc<Cell>,
    agent: AgentConfig,
    session_id: String,
    snapshot: Value,
    replies: mpsc::Receiver<String>,
) {
    let services = match shared.services.services(&agent, &session_id) {
        Ok(s) => s,
        Err(message) => {
            fail(&shared, &mut cell.lock(), None, ErrorInfo::fatal(message));
            return;
        }
    };
    let mut conversation = SessionConversation { shared: shared.clone(), cell, replies };
    let request = LaunchRequest { config: &agent, session_id, snapshot, services };
    match shared.executor.launch(request) {
        Ok(handle) => {
            handle.serve(&mut conversation);
        }
        Err(outcome) => conversation.observe(&ExecutionEvent::Closed { record: &outcome.record }),
    }
}

/// The user side of an execution launched by the gateway.
struct SessionConversation {
    shared: Arc<Shared>,
    cell: Arc<Cell>,
    replies: mpsc::Receiver<String>,
}

impl SessionConversation {
    fn record_entry(&self, live: &mut Live, entry: NewEntry) {
        if let Err(e) = live.session.append(entry, self.shared.clock.now()) {
            tracing::error!("cannot record history entry: {e}");
        }
    }

    fn close(&self, record: &TelemetryRecord) {
        let mut live = self.cell.lock();
        let (status, counter) = if matches!(record.exit, agent_core::executor::ExecExit::Ok) {
            (SessionStatus::Finished, &self.shared.counters.executions_finished)
        } else {
            (SessionStatus::Failed, &self.shared.counters.executions_failed)
        };
        let reason = match &record.exit {
            agent_core::executor::ExecExit::Ok => None,
            agent_core::executor::ExecExit::Error { error } => Some(error.message.clone()),
            agent_core::executor::ExecExit::QuotaKilled { dimension } => Some(format!("quota exceeded: {}", dimension.as_str())),
        };
        let now = self.shared.clock.now();
        if live.session.status() == SessionStatus::AwaitingUser {
            let _ = live.session.transition(SessionStatus::Running, None, None, now);
        }
        if let Err(e) = live.session.transition(status, Some(&record.exec_id), reason.as_deref(), now) {
            tracing::error!("cannot record session close: {e}");
        }
        bump(counter);
        for sse in relay_close(record) {
            self.shared.emit(&live, sse);
        }
        live.sink = None;
        live.reply = None;
    }
}

impl Conversation for SessionConversation {
    fn send(&mut self, _seq: u64, _content: &str) -> Result<(), ErrorInfo> {
        // Recorded and relayed once the op is answered, in `observe`.
        Ok(())
    }

    fn wait(&mut self, seq: u64) -> Option<String> {
        {
            let mut live = self.cell.lock();
            if let Err(e) = live.session.transition(SessionStatus::AwaitingUser, None, None, self.shared.clock.now()) {
                tracing::error!("cannot record awaiting_user: {e}");
            }
            self.shared.emit(&live, awaiting_user(seq));
            live.sink = None;
        }
        match self.replies.recv() {
            Ok(reply) => Some(reply),
            Err(_) => {
                let mut live = self.cell.lock();
                let _ = live.session.transition(SessionStatus::Running, None, Some("user side closed"), self.shared.clock.now());
                None
            }
        }
    }

    fn observe(&mut self, event: &ExecutionEvent<'_>) {
        let (event, result) = match event {
            ExecutionEvent::Closed { record } => return self.close(record),
            ExecutionEvent::Op { event, result, .. } => (*event, &result.payload),
        };
        let mut live = self.cell.lock();
        let s = &event.summary;
        match event.op.as_str() {
            "user.send" if event.ok => {
                let content = s["content"].as_str().unwrap_or_default();
                self.record_entry(&mut live, NewEntry::text(Role::Assistant, content));
            }
            "tool.call" | "kb.query" => {
                let (name, args) = if event.op == "tool.call" {
                    (s["name"].as_str().unwrap_or_default().to_string(), s["args"].clone())
                } else {
                    ("kb.query".to_string(), json!({"kb_id": s["kb_id"], "query": s["query"]}))
                };
                let outcome = if event.ok { result.clone() } else { json!({"error": s["error"]}) };
                let content = outcome.to_string();
                self.record_entry(
                    &mut live,
                    NewEntry {
                        role: Role::Tool,
                        token_count: token_estimate(&content),
                        content,
                        tool_name: Some(name),
                        tool_args: Some(args),
                        tool_result: Some(outcome),
                    },
                );
            }
            _ => {}
        }
        for sse in relay_op(event, result) {
            self.shared.emit(&live, sse);
        }
    }
}

//! Sessions and their dialogue history, persisted as one append-only JSONL
//! file per session.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Running,
    AwaitingUser,
    Finished,
    Failed,
}

impl SessionStatus {
    pub const ALL: [SessionStatus; 5] = [
        SessionStatus::Idle,
        SessionStatus::Running,
        SessionStatus::AwaitingUser,
        SessionStatus::Finished,
        SessionStatus::Failed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Idle => "idle",
            SessionStatus::Running => "running",
            SessionStatus::AwaitingUser => "awaiting_user",
            SessionStatus::Finished => "finished",
            SessionStatus::Failed => "failed",
        }
    }

    /// idle → running → (awaiting_user → running)* → finished | failed
    pub fn can_become(self, next: SessionStatus) -> bool {
        use SessionStatus::*;
        matches!(
            (self, next),
            (Idle, Running) | (Running, AwaitingUser) | (AwaitingUser, Running) | (Running, Finished) | (Running, Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Finished | SessionStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueEntry {
    pub turn_index: u64,
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_args: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<Value>,
    pub token_count: u64,
}

/// Entry fields chosen by the caller; the session assigns the turn index.
#[derive(Debug, Clone, PartialEq)]
pub struct NewEntry {
    pub role: Role,
    pub content: String,
    pub tool_name: Option<String>,
    pub tool_args: Option<Value>,
    pub tool_result: Option<Value>,
    pub token_count: u64,
}

impl NewEntry {
    pub fn text(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        NewEntry {
            token_count: agent_core::providers::token_estimate(&content),
            role,
            content,
            tool_name: None,
            tool_args: None,
            tool_result: None,
        }
    }
}

/// One line of a session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionLine {
    Created {
        session_id: String,
        user_id: String,
        agent_id: String,
        at: DateTime<Utc>,
    },
    Entry {
        #[serde(flatten)]
        entry: DialogueEntry,
        at: DateTime<Utc>,
    },
    Status {
        status: SessionStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exec_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        at: DateTime<Utc>,
    },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session {session_id}: {from:?} cannot become {to:?}")]
    Transition {
        session_id: String,
        from: SessionStatus,
        to: SessionStatus,
    },
    #[error("session {session_id}: system entries are only allowed at turn 0")]
    MisplacedSystem { session_id: String },
    #[error("session file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState {
    pub session_id: String,
    pub user_id: String,
    pub agent_id: String,
    pub status: SessionStatus,
    pub history: Vec<DialogueEntry>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Executions launched for this session, oldest first.
    pub exec_ids: Vec<String>,
}

impl SessionState {
    fn apply(&mut self, line: &SessionLine) -> Result<(), SessionError> {
        match line {
            SessionLine::Created { .. } => {}
            SessionLine::Entry { entry, at } => {
                let expected = self.history.len() as u64;
                if entry.turn_index != expected {
                    return Err(SessionError::Corrupt {
                        path: PathBuf::new(),
                        message: format!("turn {} out of order, expected {expected}", entry.turn_index),
                    });
                }
                if (entry.role == Role::System) != (expected == 0) {
                    return Err(SessionError::MisplacedSystem { session_id: self.session_id.clone() });
                }
                self.history.push(entry.clone());
                self.updated_at = *at;
            }
            SessionLine::Status { status, exec_id, at, .. } => {
                if !self.status.can_become(*status) {
                    return Err(SessionError::Transition {
                        session_id: self.session_id.clone(),
                        from: self.status,
                        to: *status,
                    });
                }
                self.status = *status;
                self.exec_ids.extend(exec_id.clone());
                self.updated_at = *at;
            }
        }
        Ok(())
    }

    /// Entries with `turn_index <= up_to`, or all of them.
    pub fn history_up_to(&self, up_to: Option<u64>) -> &[DialogueEntry] {
        match up_to {
            Some(n) => &self.history[..self.history.len().min(n as usize + 1)],
            None => &self.history,
        }
    }
}

/// A session and its backing file. Every change is validated, then written
/// and flushed, then applied in memory.
#[derive(Debug)]
pub struct Session {
    state: SessionState,
    path: PathBuf,
    file: File,
}

impl Session {
    pub fn path_in(dir: &Path, session_id: &str) -> PathBuf {
        dir.join(format!("{session_id}.jsonl"))
    }

    pub fn create(
        dir: &Path,
        session_id: &str,
        user_id: &str,
        agent_id: &str,
        system_prompt: &str,
        at: DateTime<Utc>,
    ) -> Result<Self, SessionError> {
        std::fs::create_dir_all(dir)?;
        let path = Self::path_in(dir, session_id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut session = Session {
            state: SessionState {
                session_id: session_id.to_string(),
                user_id: user_id.to_string(),
                agent_id: agent_id.to_string(),
                status: SessionStatus::Idle,
                history: Vec::new(),
                created_at: at,
                updated_at: at,
                exec_ids: Vec::new(),
            },
            path,
            file,
        };
        session.write(&SessionLine::Created {
            session_id: session_id.to_string(),
            user_id: user_id.to_string(),
            agent_id: agent_id.to_string(),
            at,
        })?;
        session.append(NewEntry::text(Role::System, system_prompt), at)?;
        Ok(session)
    }

    /// Rebuild a session by replaying its file.
    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let corrupt = |message: String| SessionError::Corrupt { path: path.to_path_buf(), message };
        let reader = BufReader::new(File::open(path)?);
        let mut state: Option<SessionState> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let parsed: SessionLine =
                serde_json::from_str(&line).map_err(|e| corrupt(format!("line {}: {e}", n + 1)))?;
            match (&mut state, &parsed) {
                (None, SessionLine::Created { session_id, user_id, agent_id, at }) => {
                    state = Some(SessionState {
                        session_id: session_id.clone(),
                        user_id: user_id.clone(),
                        agent_id: agent_id.clone(),
                        status: SessionStatus::Idle,
                        history: Vec::new(),
                        created_at: *at,
                        updated_at: *at,
                        exec_ids: Vec::new(),
                    })
                }
                (None, _) => return Err(corrupt("first line is not a `created` record".into())),
                (Some(_), SessionLine::Created { .. }) => return Err(corrupt(format!("line {}: duplicate `created`", n + 1))),
                (Some(s), line) => s.apply(line).map_err(|e| corrupt(format!("line {}: {e}", n + 1)))?,
            }
        }
        let state = state.ok_or_else(|| corrupt("empty file".into()))?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Session { state, path: path.to_path_buf(), file })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn status(&self) -> SessionStatus {
        self.state.status
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write(&mut self, line: &SessionLine) -> Result<(), SessionError> {
        let mut text = serde_json::to_string(line).expect("session lines serialize");
        text.push('\n');
        self.file.write_all(text.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }

    fn commit(&mut self, line: SessionLine) -> Result<(), SessionError> {
        // Validate on a copy first so a rejected change is never persisted.
        let mut next = self.state.clone();
        next.apply(&line)?;
        self.write(&line)?;
        self.state = next;
        Ok(())
    }

    pub fn append(&mut self, entry: NewEntry, at: DateTime<Utc>) -> Result<&DialogueEntry, SessionError> {
        let entry = DialogueEntry {
            turn_index: self.state.history.len() as u64,
            role: entry.role,
            content: entry.content,
            tool_name: entry.tool_name,
            tool_args: entry.tool_args,
            tool_result: entry.tool_result,
            token_count: entry.token_count,
        };
        self.commit(SessionLine::Entry { entry, at })?;
        Ok(self.state.history.last().expect("just appended"))
    }

    pub fn transition(
        &mut self,
        status: SessionStatus,
        exec_id: Option<&str>,
        reason: Option<&str>,
        at: DateTime<Utc>,
    ) -> Result<(), SessionError> {
        self.commit(SessionLine::Status {
            status,
            exec_id: exec_id.map(str::to_string),
            reason: reason.map(str::to_string),
            at,
        })
    }

    /// Context snapshot for an execution: the history in turn order, then
    /// the incoming user message.
    pub fn assemble_context(&self, incoming: &str) -> Vec<Value> {
        let mut snapshot: Vec<Value> = self.state.history.iter().map(snapshot_message).collect();
        snapshot.push(serde_json::json!({"role": "user", "content": incoming}));
        snapshot
    }
}

fn snapshot_message(entry: &DialogueEntry) -> Value {
    let mut message = serde_json::json!({"role": entry.role, "content": entry.content});
    if let Some(name) = &entry.tool_name {
        message["name"] = Value::String(name.clone());
    }
    message
}

/// Load every `*.jsonl` session in `dir`.
pub fn load_all(dir: &Path) -> Result<Vec<Session>, SessionError> {
    let mut sessions = Vec::new();
    if !dir.exists() {
        return Ok(sessions);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        sessions.push(Session::load(&path)?);
    }
    Ok(sessions)
}

mod common;

use agent_control::session::{Session, SessionLine};
use agent_control::sse::op_sequence;
use std::sync::Arc;

use agent_control::services::ServiceFactory;
use agent_control::{AgentRegistry, Gateway, GatewayError, RejectCode, Role, SessionStatus, SseRecord};
use agent_core::config::AgentConfig;
use agent_core::executor::{ExecutionServices, Executor, TelemetryRecord};
use common::{drain, RETAIL_TOKEN, STOP};
use serde_json::json;

const FIRST: &str = "Please cancel order #W2001, I no longer need it. My email is bob@example.com.";
const CONFIRM: &str = "Yes, please go ahead.";

fn rejection(result: Result<impl std::fmt::Debug, GatewayError>) -> RejectCode {
    match result {
        Err(GatewayError::Rejected { code, .. }) => code,
        other => panic!("expected a rejection, got {other:?}"),
    }
}

fn events(records: &[SseRecord]) -> Vec<&str> {
    records.iter().map(|r| r.event).collect()
}

/// A full demo conversation: returns the session id and every stream.
fn converse(gateway: &Gateway) -> (String, Vec<Vec<SseRecord>>) {
    let session = gateway.create_session("bob", "retail", RETAIL_TOKEN).unwrap();
    let mut streams = Vec::new();
    for message in [FIRST, CONFIRM, STOP] {
        streams.push(drain(gateway.post_message(&session.session_id, RETAIL_TOKEN, message).unwrap()));
    }
    (session.session_id, streams)
}

#[test]
fn requests_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    assert!(gateway.validate_request("bob", "retail", RETAIL_TOKEN).is_ok());
    assert_eq!(rejection(gateway.validate_request("bob", "retail", common::AIRLINE_TOKEN)), RejectCode::Unauthorized);
    assert_eq!(rejection(gateway.validate_request("bob", "retail", "")), RejectCode::Unauthorized);
    assert_eq!(rejection(gateway.validate_request("bob", "hotel", RETAIL_TOKEN)), RejectCode::NotFound);
    assert_eq!(rejection(gateway.validate_request("mallory", "retail", RETAIL_TOKEN)), RejectCode::Forbidden);
    assert_eq!(rejection(gateway.create_session("bob", "retail", "wrong")), RejectCode::Unauthorized);
    assert_eq!(gateway.status()["requests_rejected"], 5);
}

#[test]
fn first_message_runs_until_the_blueprint_waits() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    let session = gateway.create_session("bob", "retail", RETAIL_TOKEN).unwrap();
    assert_eq!(session.status, SessionStatus::Idle);
    let id = session.session_id;

    let stream = gateway.post_message(&id, RETAIL_TOKEN, FIRST).unwrap();
    // The session is running until the blueprint blocks on the user.
    let busy = gateway.post_message(&id, RETAIL_TOKEN, "hello?");
    assert!(matches!(busy, Err(GatewayError::Conflict(_))), "{busy:?}");
    let records = drain(stream);
    assert_eq!(records.first().unwrap(), &SseRecord::status("running"));
    let last = records.last().unwrap();
    assert_eq!((last.event, last.data["status"].as_str()), ("status", Some("awaiting_user")));
    assert!(events(&records).contains(&"assistant.message"));

    let state = gateway.session(&id).unwrap();
    assert_eq!(state.status, SessionStatus::AwaitingUser);
    assert!(state.history.len() >= 3);
    let roles: Vec<Role> = state.history.iter().map(|e| e.role).collect();
    assert_eq!(&roles[..2], [Role::System, Role::User]);
    // The conflicting message left no trace in the history.
    assert!(state.history.iter().all(|e| e.content != "hello?"));
}

#[test]
fn conversation_streams_match_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    let (id, streams) = converse(&gateway);

    let state = gateway.session(&id).unwrap();
    assert_eq!(state.status, SessionStatus::Finished);
    assert_eq!(state.exec_ids.len(), 1);
    let last = streams.last().unwrap();
    assert_eq!(events(&last[last.len() - 2..]), ["status", "done"]);
    assert_eq!(last[last.len() - 2].data["status"], "finished");

    let line = gateway.telemetry(&state.exec_ids[0], RETAIL_TOKEN).unwrap();
    let record: TelemetryRecord = serde_json::from_str(&line).unwrap();
    let all: Vec<&SseRecord> = streams.iter().flatten().collect();
    let from_sse = op_sequence(all.iter().map(|r| (r.event, &r.data)));
    let from_telemetry: Vec<(u64, String)> = record.events.iter().map(|e| (e.seq, e.op.clone())).collect();
    assert_eq!(from_sse, from_telemetry);

    // Each resumed wait returned exactly the posted message.
    let waits: Vec<&str> = record
        .events
        .iter()
        .filter(|e| e.op == "user.wait")
        .map(|e| e.summary["content"].as_str().unwrap())
        .collect();
    assert_eq!(waits, [CONFIRM, STOP]);

    let cancelled = all
        .iter()
        .find(|r| r.event == "tool.result" && r.data["name"] == "cancel_pending_order")
        .expect("cancellation result streamed");
    assert_eq!(cancelled.data["result"]["ok"], true);
    let replies: Vec<&str> = all
        .iter()
        .filter(|r| r.event == "assistant.message")
        .map(|r| r.data["content"].as_str().unwrap())
        .collect();
    assert!(replies.last().unwrap().contains("cancelled"));
    assert!(matches!(gateway.post_message(&id, RETAIL_TOKEN, "more"), Err(GatewayError::Conflict(_))));
}

#[test]
fn history_matches_the_persisted_file() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    let (id, _) = converse(&gateway);

    let text = std::fs::read_to_string(dir.path().join("sessions").join(format!("{id}.jsonl"))).unwrap();
    let persisted: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["type"] == "entry")
        .map(|mut v| {
            let o = v.as_object_mut().unwrap();
            o.remove("type");
            o.remove("at");
            v
        })
        .collect();
    let full = gateway.history(&id, RETAIL_TOKEN, None).unwrap();
    assert_eq!(serde_json::to_value(&full).unwrap(), json!(persisted));
    assert_eq!(gateway.history(&id, RETAIL_TOKEN, Some(0)).unwrap().len(), 1);
    assert_eq!(gateway.history(&id, RETAIL_TOKEN, Some(2)).unwrap().len(), 3);
    assert!(full.windows(2).all(|w| w[0].turn_index < w[1].turn_index));
    let tools: Vec<&str> = full.iter().filter_map(|e| e.tool_name.as_deref()).collect();
    assert!(tools.contains(&"cancel_pending_order"));
    assert!(matches!(gateway.history("nope", RETAIL_TOKEN, None), Err(GatewayError::SessionNotFound(_))));
}

#[test]
fn snapshot_of_a_stored_session_is_its_file_plus_the_message() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    let (id, _) = converse(&gateway);
    drop(gateway);
    let path = dir.path().join("sessions").join(format!("{id}.jsonl"));
    let session = agent_control::session::Session::load(&path).unwrap();
    let snapshot = session.assemble_context("again");
    let mut expected: Vec<serde_json::Value> = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .filter_map(|l| match serde_json::from_str(l).unwrap() {
            SessionLine::Entry { entry, .. } => {
                let mut m = json!({"role": entry.role, "content": entry.content});
                if let Some(name) = entry.tool_name {
                    m["name"] = json!(name);
                }
                Some(m)
            }
            _ => None,
        })
        .collect();
    expected.push(json!({"role": "user", "content": "again"}));
    assert_eq!(snapshot, expected);
}

#[test]
fn shutdown_closes_waiting_executions() {
    let dir = tempfile::tempdir().unwrap();
    let (done_id, waiting_id, history) = {
        let gateway = common::gateway(dir.path());
        let (done_id, _) = converse(&gateway);
        let waiting = gateway.create_session("bob", "retail", RETAIL_TOKEN).unwrap();
        drain(gateway.post_message(&waiting.session_id, RETAIL_TOKEN, FIRST).unwrap());
        let history = gateway.history(&done_id, RETAIL_TOKEN, None).unwrap();
        (done_id, waiting.session_id, history)
    };
    let gateway = common::gateway(dir.path());
    assert_eq!(gateway.session(&done_id).unwrap().status, SessionStatus::Finished);
    assert_eq!(gateway.history(&done_id, RETAIL_TOKEN, None).unwrap(), history);
    let closed = gateway.session(&waiting_id).unwrap();
    assert!(closed.status.is_terminal(), "{:?}", closed.status);
    assert_eq!(closed.exec_ids.len(), 1);
    let fresh = gateway.create_session("bob", "retail", RETAIL_TOKEN).unwrap();
    assert!(fresh.session_id != done_id && fresh.session_id != waiting_id);
}

#[test]
fn restart_fails_sessions_left_mid_execution() {
    let dir = tempfile::tempdir().unwrap();
    let sessions = dir.path().join("sessions");
    let at = chrono::Utc::now();
    let mut waiting = Session::create(&sessions, "crashed-1", "bob", "retail", "policy", at).unwrap();
    waiting.transition(SessionStatus::Running, None, None, at).unwrap();
    waiting.transition(SessionStatus::AwaitingUser, None, None, at).unwrap();
    let mut running = Session::create(&sessions, "crashed-2", "bob", "retail", "policy", at).unwrap();
    running.transition(SessionStatus::Running, None, None, at).unwrap();
    Session::create(&sessions, "untouched", "bob", "retail", "policy", at).unwrap();
    drop((waiting, running));

    let gateway = common::gateway(dir.path());
    assert_eq!(gateway.session("crashed-1").unwrap().status, SessionStatus::Failed);
    assert_eq!(gateway.session("crashed-2").unwrap().status, SessionStatus::Failed);
    assert_eq!(gateway.session("untouched").unwrap().status, SessionStatus::Idle);
    assert_eq!(gateway.status()["sessions"]["failed"], 2);
}

#[test]
fn telemetry_is_returned_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let gateway = common::gateway(dir.path());
    let (id, _) = converse(&gateway);
    let exec_id = gateway.session(&id).unwrap().exec_ids[0].clone();
    let line = gateway.telemetry(&exec_id, RETAIL_TOKEN).unwrap();
    let log = std::fs::read_to_string(dir.path().join("telemetry.log")).unwrap();
    assert!(log.lines().any(|l| l == line));
    assert_eq!(rejection(gateway.telemetry(&exec_id, common::AIRLINE_TOKEN)), RejectCode::Unauthorized);
    assert!(matches!(gateway.telemetry("missing", RETAIL_TOKEN), Err(GatewayError::ExecutionNotFound(_))));
}

struct Unavailable;

impl ServiceFactory for Unavailable {
    fn services(&self, agent: &AgentConfig, _session_id: &str) -> Result<ExecutionServices, String> {
        Err(format!("no providers for {}", agent.agent_id))
    }
}

#[test]
fn launch_failures_fail_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = agent_bench::Fixtures::default();
    let config = agent_bench::executor_config(&fixtures, dir.path(), common::interpreter(), true).unwrap();
    let executor = Executor::new(config);
    let registry = AgentRegistry::load_dir(&common::demo_dir().join("agents"), &executor.runtime_tags()).unwrap();
    let gateway = Gateway::new(executor, registry, Arc::new(Unavailable), &dir.path().join("sessions")).unwrap();

    let session = gateway.create_session("bob", "retail", RETAIL_TOKEN).unwrap();
    let records = drain(gateway.post_message(&session.session_id, RETAIL_TOKEN, FIRST).unwrap());
    assert_eq!(events(&records), ["status", "error", "status", "done"]);
    assert_eq!(records[1].data["error"]["message"], "no providers for retail");
    assert_eq!(records[2].data["status"], "failed");
    assert_eq!(gateway.session(&session.session_id).unwrap().status, SessionStatus::Failed);
    assert_eq!(gateway.status()["executions"]["failed"], 1);
}

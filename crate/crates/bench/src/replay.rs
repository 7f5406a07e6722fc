//! Re-runs the tool calls recorded in a trace against a fresh state.

use agent_core::executor::TelemetryRecord;
use serde_json::Value;

use crate::domains::{Domain, DomainBackend};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub calls: usize,
    pub state_hash: String,
}

/// Domain an execution ran against, from its agent id (`retail`,
/// `fc-retail`, ...).
pub fn domain_of(record: &TelemetryRecord) -> Option<Domain> {
    let id = record.agent_id.as_str();
    Domain::parse(id).or_else(|| id.rsplit_once('-').and_then(|(_, d)| Domain::parse(d)))
}

/// Dispatch every recorded `tool.call` in order. Calls that failed at the
/// time fail again and leave the state untouched.
pub fn replay_tool_calls(domain: Domain, initial: Value, record: &TelemetryRecord) -> Replay {
    let backend = DomainBackend::new(domain, initial);
    let registry = backend.registry(true);
    let mut calls = 0;
    for event in record.events.iter().filter(|e| e.op == "tool.call") {
        let name = event.summary["name"].as_str().unwrap_or_default();
        let _ = registry.dispatch(name, &event.summary["args"]);
        calls += 1;
    }
    Replay {
        calls,
        state_hash: backend.hash(),
    }
}

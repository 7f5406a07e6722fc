//! OutOfMemoryError triage: GC statistics first, a heap dump only when the
//! old generation is full, then analysis of the dump. The model is asked
//! once, at the end, to word the findings.

use agent_core::protocol::{ChatMessage, LlmRequest, Role};
use serde_json::{json, Value};

use crate::client::{CallError, Client, EXIT_PROTOCOL};

/// Old-generation utilization (percent) at which the heap counts as full.
pub const OLD_GEN_FULL: f64 = 95.0;

fn value(client: &mut Client, tool: &str, args: Value) -> Result<Value, CallError> {
    let doc = client.tool(tool, args)?;
    if doc["ok"] == true {
        Ok(doc["value"].clone())
    } else {
        Ok(json!({"error": doc["error"]}))
    }
}

fn triage(client: &mut Client, pid: i64) -> Result<Value, CallError> {
    let gc = value(client, "run_jstat", json!({"pid": pid}))?;
    let old_gen = gc["old_gen_utilization"].as_f64().unwrap_or(0.0);
    if old_gen < OLD_GEN_FULL {
        return Ok(json!({"gc": gc, "diagnosis": "old generation not full; no heap dump taken"}));
    }
    let dump = value(client, "run_jmap", json!({"pid": pid}))?;
    let analysis = value(client, "analyze_heap_dump", json!({"path": dump["path"]}))?;
    Ok(json!({"gc": gc, "dump": dump, "analysis": analysis}))
}

pub fn run(mut client: Client, params: &Value) -> i32 {
    let pid = params["pid"].as_i64().unwrap_or(4242);
    let findings = match triage(&mut client, pid) {
        Ok(f) => f,
        Err(CallError::Protocol(_)) => return EXIT_PROTOCOL,
        Err(CallError::Engine(e)) => return client.finish("error", json!({"error": e})),
    };
    let policy = client.init()["policy"].as_str().unwrap_or("").to_string();
    let question = client.init()["snapshot"]
        .as_array()
        .and_then(|s| s.iter().rev().find(|e| e["role"] == "user"))
        .and_then(|e| e["content"].as_str())
        .unwrap_or("")
        .to_string();
    let request = LlmRequest::new(
        "",
        vec![
            ChatMessage::new(Role::System, policy),
            ChatMessage::new(Role::User, question),
            ChatMessage::new(Role::Tool, format!("Findings: {findings}\n\nSummarize the root cause.")),
        ],
    );
    let summary = match client.llm(&request) {
        Ok(r) => r.message.content,
        Err(CallError::Protocol(_)) => return EXIT_PROTOCOL,
        Err(CallError::Engine(e)) => return client.finish("error", json!({"error": e})),
    };
    if client.send_user(&summary).is_err() {
        return EXIT_PROTOCOL;
    }
    // One follow-up turn, then the workflow is complete.
    match client.wait_user() {
        Ok(_) => client.finish("ok", json!({"findings": findings})),
        Err(_) => EXIT_PROTOCOL,
    }
}

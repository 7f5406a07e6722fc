//! SSE records and the mapping from execution events to them.

use agent_core::executor::{ExecExit, TelemetryEvent, TelemetryRecord};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct SseRecord {
    pub event: &'static str,
    pub data: Value,
}

impl SseRecord {
    pub fn new(event: &'static str, data: Value) -> Self {
        SseRecord { event, data }
    }

    /// `event: <type>\ndata: <document>\n\n`. Compact JSON never contains a
    /// raw newline, so the data always fits one line.
    pub fn to_wire(&self) -> String {
        format!("event: {}\ndata: {}\n\n", self.event, self.data)
    }

    pub fn status(status: &str) -> Self {
        SseRecord::new("status", json!({ "status": status }))
    }
}

fn tagged(event: &TelemetryEvent, mut data: Value) -> Value {
    data["seq"] = json!(event.seq);
    data["op"] = json!(event.op);
    data
}

/// Records for one answered op. `user.wait` yields none here: its
/// `awaiting_user` status goes out when the wait begins.
pub fn relay_op(event: &TelemetryEvent, result: &Value) -> Vec<SseRecord> {
    let s = &event.summary;
    match event.op.as_str() {
        "user.wait" => Vec::new(),
        "user.send" => vec![SseRecord::new(
            "assistant.message",
            tagged(event, json!({"content": s["content"]})),
        )],
        "llm.invoke" => {
            let mut data = json!({"ok": event.ok, "model": s["model"], "usage": s["usage"], "finish_reason": s["finish_reason"]});
            if !event.ok {
                data["error"] = s["error"].clone();
            }
            vec![SseRecord::new("llm.usage", tagged(event, data))]
        }
        "tool.call" | "kb.query" => {
            let (name, args) = if event.op == "tool.call" {
                (s["name"].clone(), s["args"].clone())
            } else {
                (json!("kb.query"), json!({"kb_id": s["kb_id"], "query": s["query"]}))
            };
            let mut outcome = json!({"name": name, "ok": event.ok});
            if event.ok {
                outcome["result"] = result.clone();
            } else {
                outcome["error"] = s["error"].clone();
            }
            vec![
                SseRecord::new("tool.call", tagged(event, json!({"name": name, "args": args}))),
                SseRecord::new("tool.result", tagged(event, outcome)),
            ]
        }
        _ => vec![SseRecord::new(
            "status",
            tagged(event, json!({"status": "running", "diagnostic": s})),
        )],
    }
}

/// The `awaiting_user` status that stands for a `user.wait` op.
pub fn awaiting_user(seq: u64) -> SseRecord {
    SseRecord::new("status", json!({"status": "awaiting_user", "seq": seq, "op": "user.wait"}))
}

/// Closing records of an execution: `error` on failure, the final status,
/// then `done`.
pub fn relay_close(record: &TelemetryRecord) -> Vec<SseRecord> {
    let mut out = Vec::new();
    let mut done = json!({"exec_id": record.exec_id});
    if let Some(finish) = record.events.iter().rev().find(|e| e.op == "finish") {
        done = tagged(finish, done);
        done["output"] = finish.summary.get("output").cloned().unwrap_or(Value::Null);
    }
    match &record.exit {
        ExecExit::Ok => {
            out.push(SseRecord::status("finished"));
            done["exit"] = json!("ok");
        }
        ExecExit::Error { error } => {
            out.push(SseRecord::new("error", json!({"exec_id": record.exec_id, "error": error})));
            out.push(SseRecord::status("failed"));
            done["exit"] = json!("error");
        }
        ExecExit::QuotaKilled { dimension } => {
            out.push(SseRecord::new(
                "error",
                json!({"exec_id": record.exec_id, "error": {"class": "quota", "message": format!("quota exceeded: {}", dimension.as_str())}}),
            ));
            out.push(SseRecord::status("failed"));
            done["exit"] = json!("quota_killed");
        }
    }
    out.push(SseRecord::new("done", done));
    out
}

/// Op sequence reconstructed from a stream: records carrying a `seq`,
/// with the paired `tool.call`/`tool.result` counted once.
pub fn op_sequence<'a>(records: impl IntoIterator<Item = (&'a str, &'a Value)>) -> Vec<(u64, String)> {
    let mut ops: Vec<(u64, String)> = Vec::new();
    for (_, data) in records {
        let (Some(seq), Some(op)) = (data["seq"].as_u64(), data["op"].as_str()) else {
            continue;
        };
        if ops.last().is_some_and(|(s, _)| *s == seq) {
            continue;
        }
        ops.push((seq, op.to_string()));
    }
    ops
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(seq: u64, op: &str, ok: bool, summary: Value) -> TelemetryEvent {
        TelemetryEvent { seq, op: op.into(), request_id: seq, ok, attempts: 1, duration_ms: 0, summary }
    }

    #[test]
    fn user_send_becomes_assistant_message() {
        let records = relay_op(&event(3, "user.send", true, json!({"content": "Your refund is confirmed"})), &json!({}));
        assert_eq!(records.len(), 1);
        assert_eq!(
            records[0].to_wire(),
            "event: assistant.message\ndata: {\"content\":\"Your refund is confirmed\",\"op\":\"user.send\",\"seq\":3}\n\n"
        );
    }

    #[test]
    fn tool_calls_become_call_and_result() {
        let e = event(2, "tool.call", true, json!({"name": "get_order_details", "args": {"order_id": "#W1"}, "result": {"ok": true}}));
        let records = relay_op(&e, &json!({"ok": true, "value": 1}));
        let names: Vec<&str> = records.iter().map(|r| r.event).collect();
        assert_eq!(names, ["tool.call", "tool.result"]);
        assert_eq!(records[1].data["result"], json!({"ok": true, "value": 1}));
        let failed = relay_op(&event(2, "tool.call", false, json!({"name": "x", "args": {}, "error": {"class": "validation"}})), &Value::Null);
        assert_eq!(failed[1].data["error"]["class"], "validation");
    }

    #[test]
    fn unknown_ops_map_to_status() {
        let records = relay_op(&event(5, "log", true, json!({"level": "info"})), &json!({}));
        assert_eq!(records[0].event, "status");
        assert_eq!(records[0].data["diagnostic"], json!({"level": "info"}));
    }

    #[test]
    fn data_is_a_single_line() {
        let r = SseRecord::new("assistant.message", json!({"content": "two\nlines"}));
        let wire = r.to_wire();
        assert_eq!(wire.matches('\n').count(), 3);
        assert!(wire.ends_with("\n\n"));
    }

    #[test]
    fn op_sequence_merges_paired_records() {
        let records = [
            SseRecord::status("running"),
            SseRecord::new("llm.usage", json!({"seq": 1, "op": "llm.invoke"})),
            SseRecord::new("tool.call", json!({"seq": 2, "op": "tool.call"})),
            SseRecord::new("tool.result", json!({"seq": 2, "op": "tool.call"})),
            awaiting_user(3),
        ];
        let ops = op_sequence(records.iter().map(|r| (r.event, &r.data)));
        assert_eq!(ops, [(1, "llm.invoke".into()), (2, "tool.call".into()), (3, "user.wait".into())]);
    }
}

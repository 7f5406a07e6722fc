//! JVM diagnostics for the OutOfMemoryError triage workflow.

use agent_core::protocol::ToolSpec;
use serde_json::{json, Value};

use super::{int_arg, spec, str_arg};

pub fn tool_specs() -> Vec<ToolSpec> {
    vec![
        spec("run_jstat", "GC utilization statistics of a JVM process.", json!({"pid": {"type": "integer"}}), &["pid"]),
        spec("run_jmap", "Write a heap dump of a JVM process.", json!({"pid": {"type": "integer"}}), &["pid"]),
        spec("analyze_heap_dump", "Summarize the dominators of a heap dump.", json!({"path": {"type": "string"}}), &["path"]),
    ]
}

pub fn call(state: &mut Value, function: &str, args: &Value) -> Result<Value, String> {
    match function {
        "run_jstat" => {
            let pid = int_arg(args, "pid")?;
            let process = process(state, pid)?;
            let mut report = json!({"pid": pid, "name": process["name"]});
            if let (Some(out), Some(gc)) = (report.as_object_mut(), process["gc"].as_object()) {
                out.extend(gc.clone());
            }
            Ok(report)
        }
        "run_jmap" => {
            let pid = int_arg(args, "pid")?;
            let dump = process(state, pid)?["heap_dump"].clone();
            let path = dump["path"].as_str().ok_or("process has no heap dump")?.to_string();
            state["dumps"][&path] = dump;
            Ok(json!({"pid": pid, "path": path}))
        }
        "analyze_heap_dump" => {
            let path = str_arg(args, "path")?;
            let dump = state["dumps"].get(path).ok_or_else(|| format!("no heap dump at {path}"))?;
            Ok(json!({"path": path, "dominators": dump["dominators"]}))
        }
        other => Err(format!("unknown ops function {other}")),
    }
}

fn process(state: &Value, pid: i64) -> Result<&Value, String> {
    state["processes"]
        .get(pid.to_string())
        .ok_or_else(|| format!("no JVM process with pid {pid}"))
}

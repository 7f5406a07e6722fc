//! Workflows the stub interpreter can run, selected by name from a `.bp`
//! file: `{"workflow": "<name>", ...params}`.

pub mod assistant;
pub mod intents;
pub mod oom;
pub mod probes;

use std::path::Path;

use serde_json::Value;

use crate::client::Client;

pub const WORKFLOWS: &[&str] = &[
    "retail_agent",
    "airline_agent",
    "oom_triage",
    "llm_tool_finish",
    "flaky",
    "spin",
    "balloon",
    "malformed",
    "frame_flood",
    "vanish",
    "stale_ids",
    "env_dump",
    "write_attempt",
    "connect_attempt",
    "echo",
];

/// Run `workflow`; returns the process exit code.
pub fn run(workflow: &str, params: &Value, entry: &Path) -> i32 {
    // These two also run without an engine connection.
    match workflow {
        "env_dump" => return probes::env_dump(Client::connect().ok()),
        "connect_attempt" => return probes::connect_attempt(Client::connect().ok(), params),
        _ => {}
    }
    let client = match Client::connect() {
        Ok(client) => client,
        Err(code) => return code,
    };
    match workflow {
        "retail_agent" => assistant::run(client, "retail", params),
        "airline_agent" => assistant::run(client, "airline", params),
        "oom_triage" => oom::run(client, params),
        "llm_tool_finish" => probes::llm_tool_finish(client, params),
        "flaky" => probes::flaky(client, params),
        "spin" => probes::spin(client),
        "balloon" => probes::balloon(client),
        "malformed" => probes::malformed(client),
        "frame_flood" => probes::frame_flood(client),
        "vanish" => probes::vanish(client, params),
        "stale_ids" => probes::stale_ids(client),
        "write_attempt" => probes::write_attempt(client, entry),
        "echo" => probes::echo(client),
        other => client.finish("error", serde_json::json!({"error": format!("unknown workflow {other}")})),
    }
}

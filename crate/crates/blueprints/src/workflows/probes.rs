//! Small blueprints that exercise one engine behaviour each, including
//! deliberately misbehaving ones for the quota and isolation tests.

use std::io::Write;
use std::time::Duration;

use agent_core::protocol::{ChatMessage, LlmRequest, Op, Role};
use serde_json::{json, Value};

use crate::client::{CallError, Client, EXIT_PROTOCOL};

fn engine_error(client: Client, e: CallError) -> i32 {
    match e {
        CallError::Engine(e) => client.finish("error", json!({"error": e})),
        CallError::Protocol(_) => EXIT_PROTOCOL,
    }
}

fn prompt(text: &str) -> LlmRequest {
    LlmRequest::new("", vec![ChatMessage::new(Role::User, text)])
}

/// llm.invoke, one tool call, finish.
pub fn llm_tool_finish(mut client: Client, params: &Value) -> i32 {
    let answer = match client.llm(&prompt(params["prompt"].as_str().unwrap_or("plan"))) {
        Ok(r) => r,
        Err(e) => return engine_error(client, e),
    };
    let tool = params["tool"].as_str().unwrap_or("echo");
    let result = match client.tool(tool, params["args"].clone()) {
        Ok(doc) => doc,
        Err(e) => return engine_error(client, e),
    };
    client.finish("ok", json!({"llm": answer.message.content, "tool": result}))
}

/// One llm.invoke; the outcome decides the finish status.
pub fn flaky(mut client: Client, params: &Value) -> i32 {
    match client.llm(&prompt(params["prompt"].as_str().unwrap_or("validate"))) {
        Ok(r) => client.finish("ok", json!({"content": r.message.content})),
        Err(e) => engine_error(client, e),
    }
}

pub fn spin(_client: Client) -> i32 {
    let mut x: u64 = 0;
    loop {
        x = std::hint::black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
    }
}

/// Allocates and touches about 4 MiB every 50 ms, forever.
pub fn balloon(_client: Client) -> i32 {
    let mut held: Vec<Vec<u8>> = Vec::new();
    loop {
        let mut block = vec![0u8; 4 * 1024 * 1024];
        for page in block.chunks_mut(4096) {
            page[0] = 1;
        }
        held.push(std::hint::black_box(block));
        std::thread::sleep(Duration::from_millis(50));
    }
}

/// Sends a header and a body that is not a frame document, then hangs.
pub fn malformed(mut client: Client) -> i32 {
    let body = b"{\"id\": 1, \"kind\": \"request\", \"op\":";
    let stream = client.stream();
    let _ = stream.write_all(&(body.len() as u32).to_be_bytes());
    let _ = stream.write_all(body);
    let _ = stream.flush();
    std::thread::sleep(Duration::from_secs(60));
    EXIT_PROTOCOL
}

/// Sends log requests until the engine stops answering.
pub fn frame_flood(mut client: Client) -> i32 {
    loop {
        if client.call(Op::Log, json!({"flood": true})).is_err() {
            return EXIT_PROTOCOL;
        }
    }
}

/// Connects, then exits without sending finish.
pub fn vanish(_client: Client, params: &Value) -> i32 {
    params["code"].as_i64().unwrap_or(3) as i32
}

/// Sends frames whose ids do not increase.
pub fn stale_ids(mut client: Client) -> i32 {
    let _ = client.call(Op::Log, json!({"n": 1}));
    let frame = agent_core::protocol::Frame::request(1, Op::Log, json!({"n": 2}));
    let _ = agent_core::protocol::write_frame(client.stream(), &frame);
    std::thread::sleep(Duration::from_secs(60));
    EXIT_PROTOCOL
}

pub fn sorted_env() -> Vec<(String, String)> {
    let mut vars: Vec<_> = std::env::vars().collect();
    vars.sort();
    vars
}

/// Prints the environment; reports it over the protocol when connected.
pub fn env_dump(client: Option<Client>) -> i32 {
    let vars = sorted_env();
    for (k, v) in &vars {
        println!("{k}={v}");
    }
    match client {
        Some(mut client) => {
            let env: serde_json::Map<_, _> = vars.into_iter().map(|(k, v)| (k, json!(v))).collect();
            let cwd = std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default();
            let _ = client.log(json!({"env": env, "cwd": cwd}));
            client.finish("ok", json!({"cwd": cwd}))
        }
        None => 0,
    }
}

fn try_write(path: &std::path::Path) -> &'static str {
    match std::fs::write(path, b"written from the sandbox") {
        Ok(()) => "allowed",
        Err(_) => "denied",
    }
}

/// Tries to write next to its own entry file and into the scratch dir.
pub fn write_attempt(mut client: Client, entry: &std::path::Path) -> i32 {
    let blueprint_dir = entry.parent().unwrap_or(std::path::Path::new("."));
    let into_blueprint = try_write(&blueprint_dir.join("injected.txt"));
    let overwrite_entry = match std::fs::OpenOptions::new().append(true).open(entry) {
        Ok(_) => "allowed",
        Err(_) => "denied",
    };
    let into_scratch = try_write(std::path::Path::new("scratch-note.txt"));
    let report = json!({
        "blueprint_dir": into_blueprint,
        "entry_file": overwrite_entry,
        "scratch": into_scratch,
    });
    println!("{report}");
    let _ = client.log(report.clone());
    client.finish("ok", report)
}

/// Tries an outbound TCP connection; reports over the protocol if it can.
pub fn connect_attempt(client: Option<Client>, params: &Value) -> i32 {
    let target = params["target"].as_str().unwrap_or("127.0.0.1:9");
    let outcome = match target.parse::<std::net::SocketAddr>() {
        Ok(addr) => match std::net::TcpStream::connect_timeout(&addr, Duration::from_secs(2)) {
            Ok(_) => "connected".to_string(),
            Err(e) => format!("error: {e}"),
        },
        Err(e) => format!("error: {e}"),
    };
    println!("{outcome}");
    match client {
        Some(mut client) => {
            let _ = client.log(json!({"target": target, "outcome": outcome}));
            client.finish("ok", json!({"outcome": outcome}))
        }
        None => 0,
    }
}

/// Replies "echo: <text>" to every user message until the stop token.
pub fn echo(mut client: Client) -> i32 {
    let mut incoming = client.init()["snapshot"]
        .as_array()
        .and_then(|s| s.last())
        .filter(|e| e["role"] == "user")
        .and_then(|e| e["content"].as_str())
        .map(str::to_string);
    loop {
        let text = match incoming.take() {
            Some(t) if !t.contains(super::assistant::STOP_TOKEN) => t,
            _ => return client.finish("ok", Value::Null),
        };
        if let Err(e) = client.send_user(&format!("echo: {text}")) {
            return engine_error(client, e);
        }
        match client.wait_user() {
            Ok(next) => incoming = next,
            Err(e) => return engine_error(client, e),
        }
    }
}

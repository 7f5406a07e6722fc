use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agent_bench::replay::replay_tool_calls;
use agent_bench::sse::parse_stream;
use agent_bench::{AgentSetup, Domain, Variant, INTERPRET_SUBCOMMAND};
use agent_control::daemon::{build_gateway, DaemonConfig, DEFAULT_LISTEN};
use agent_control::sse::op_sequence;
use agent_core::executor::TelemetryRecord;
use agent_core::sandbox::RuntimeDef;
use serde_json::{json, Value};
use tokio::sync::oneshot;

use crate::bench_env::BenchEnv;
use crate::{ensure, Outcome};

const DEMO_TASK: &str = "retail-2";
const DEMO_TOKEN: &str = "retail-demo-token";
const DEMO_MESSAGES: [&str; 3] = [
    "Please cancel order #W2001, I no longer need it. My email is bob@example.com.",
    "Yes, please go ahead.",
    agent_blueprints::workflows::assistant::STOP_TOKEN,
];

fn demo_agents() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../control/fixtures/demo/agents")
}

struct Server {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    fn start(data_dir: &Path) -> Result<Server, String> {
        let config = DaemonConfig {
            listen: DEFAULT_LISTEN.parse().map_err(|e| format!("{e}"))?,
            data_dir: data_dir.to_path_buf(),
            registry: demo_agents(),
            fixtures: None,
            interpreter: None,
            deterministic: true,
        };
        let interpreter = RuntimeDef {
            program: std::env::current_exe().map_err(|e| e.to_string())?,
            args: vec![INTERPRET_SUBCOMMAND.to_string()],
        };
        let gateway = Arc::new(build_gateway(&config, interpreter)?);
        let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let shutdown = async {
                let _ = stopped.await;
            };
            let _ = runtime.block_on(agent_control::server::serve(listener, gateway, shutdown));
        });
        Ok(Server { addr, stop: Some(stop), thread: Some(thread) })
    }

    fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

fn http() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn post(url: &str, body: Value) -> Result<(u16, String), String> {
    let mut response = http().post(url).header("X-Agent-Token", DEMO_TOKEN).send_json(body).map_err(|e| e.to_string())?;
    let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
    Ok((response.status().as_u16(), text))
}

fn get(url: &str) -> Result<(u16, String), String> {
    let mut response = http().get(url).header("X-Agent-Token", DEMO_TOKEN).call().map_err(|e| e.to_string())?;
    let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
    Ok((response.status().as_u16(), text))
}

/// Demo conversation over HTTP: returns the number of SSE records and the
/// op count after checking the stream against telemetry and replay.
fn demo_run(bench: &BenchEnv) -> Result<(usize, usize), String> {
    let data = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = Server::start(data.path())?;
    let (code, body) = post(&server.url("/v1/sessions"), json!({"user_id": "bob", "agent_id": "retail"}))?;
    ensure!(code == 201, "create session answered {code}: {body}");
    let created: Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
    let session = created["session_id"].as_str().ok_or("no session id")?;

    let mut capture = String::new();
    for message in DEMO_MESSAGES {
        let (code, stream) = post(&server.url(&format!("/v1/sessions/{session}/messages")), json!({"content": message}))?;
        ensure!(code == 200, "message answered {code}: {stream}");
        capture.push_str(&stream);
    }
    let events = parse_stream(&capture).map_err(|e| format!("capture is not a valid SSE stream: {e}"))?;
    let parsed: Vec<(&str, Value)> = events
        .iter()
        .map(|e| serde_json::from_str(&e.data).map(|d| (e.event.as_str(), d)))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("SSE data is not JSON: {e}"))?;
    let (last, done) = parsed.last().ok_or("empty capture")?;
    ensure!(*last == "done" && done["exit"] == "ok", "stream ends with {last} {done}");
    let exec_id = done["exec_id"].as_str().ok_or("done carries no exec_id")?;

    let (code, line) = get(&server.url(&format!("/v1/executions/{exec_id}/telemetry")))?;
    ensure!(code == 200, "telemetry answered {code}");
    let log = std::fs::read_to_string(data.path().join("telemetry.log")).map_err(|e| e.to_string())?;
    ensure!(log.lines().any(|l| l == line), "telemetry body is not the stored line");
    let record: TelemetryRecord = serde_json::from_str(&line).map_err(|e| e.to_string())?;
    let streamed = op_sequence(parsed.iter().map(|(e, d)| (*e, d)));
    let recorded: Vec<(u64, String)> = record.events.iter().map(|e| (e.seq, e.op.clone())).collect();
    ensure!(streamed == recorded, "stream order {streamed:?} differs from telemetry {recorded:?}");

    let task = bench.task(DEMO_TASK)?;
    let replay = replay_tool_calls(Domain::Retail, bench.env.initial_state(Domain::Retail).clone(), &record);
    ensure!(replay.state_hash == task.expected.state_hash, "demo run replays to {}", replay.state_hash);
    Ok((events.len(), recorded.len()))
}

pub fn check() -> Outcome {
    let bench = BenchEnv::open()?;
    let (records, ops) = demo_run(&bench)?;

    let mut setups = vec![
        AgentSetup::blueprint(false, false),
        AgentSetup::blueprint(true, false),
        AgentSetup::blueprint(false, true),
        AgentSetup::blueprint(true, true),
    ];
    setups.extend([Variant::Fc, Variant::React, Variant::Act].map(AgentSetup::baseline));
    let results = bench.run(&bench.tasks, &setups, 1);
    let mut sound = 0;
    for r in results.iter().filter(|r| r.success) {
        let task = bench.task(&r.task_id)?;
        let record = bench.record(r)?;
        let replay = replay_tool_calls(r.domain, bench.env.initial_state(r.domain).clone(), &record);
        ensure!(
            replay.state_hash == task.expected.state_hash,
            "{} {} succeeded but replays to {}",
            r.setup.label(),
            r.task_id,
            replay.state_hash
        );
        sound += 1;
    }
    Ok(format!(
        "demo capture of {records} records parses and follows {ops} telemetry events; all {sound} successful trials of {} replay to the expected state",
        results.len()
    ))
}

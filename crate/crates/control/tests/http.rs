mod common;

use std::net::SocketAddr;
use std::sync::Arc;

use agent_bench::sse::parse_stream;
use agent_control::sse::op_sequence;
use agent_core::executor::TelemetryRecord;
use common::{RETAIL_TOKEN, STOP};
use serde_json::{json, Value};
use tokio::sync::oneshot;

struct Server {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Server {
    fn start(data_dir: &std::path::Path) -> Server {
        let gateway = Arc::new(common::gateway(data_dir));
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let runtime = tokio::runtime::Runtime::new().unwrap();
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                agent_control::server::serve(listener, gateway, async {
                    let _ = stopped.await;
                })
                .await
                .unwrap();
            });
        });
        Server { addr: addr_rx.recv().unwrap(), stop: Some(stop), thread: Some(thread) }
    }

    fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.stop.take().unwrap().send(());
        let _ = self.thread.take().unwrap().join();
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn post(url: &str, token: &str, body: Value) -> (u16, String, String) {
    let mut response = agent().post(url).header("X-Agent-Token", token).send_json(body).unwrap();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let status = response.status().as_u16();
    (status, content_type, response.body_mut().read_to_string().unwrap())
}

fn get(url: &str, token: &str) -> (u16, String) {
    let mut response = agent().get(url).header("X-Agent-Token", token).call().unwrap();
    (response.status().as_u16(), response.body_mut().read_to_string().unwrap())
}

#[test]
fn sessions_are_created_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());
    let sessions = server.url("/v1/sessions");
    let (code, _, body) = post(&sessions, RETAIL_TOKEN, json!({"user_id": "bob", "agent_id": "retail"}));
    assert_eq!(code, 201, "{body}");
    let created: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(created["status"], "idle");

    let (code, _, body) = post(&sessions, "nope", json!({"user_id": "bob", "agent_id": "retail"}));
    assert_eq!(code, 401);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["error"]["code"], "unauthorized");
    assert_eq!(post(&sessions, RETAIL_TOKEN, json!({"user_id": "bob", "agent_id": "hotel"})).0, 404);
    assert_eq!(post(&sessions, RETAIL_TOKEN, json!({"user_id": "mallory", "agent_id": "retail"})).0, 403);
    assert_eq!(post(&sessions, RETAIL_TOKEN, json!({"user_id": "bob"})).0, 422);
    assert_eq!(get(&server.url("/v1/sessions/missing/history"), RETAIL_TOKEN).0, 404);

    let (code, body) = get(&server.url("/v1/status"), "");
    assert_eq!(code, 200);
    let status: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(status["sessions_created"], 1);
    assert_eq!(status["sessions"]["idle"], 1);
    assert_eq!(status["requests_rejected"], 3);
}

#[test]
fn sse_capture_parses_and_follows_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());
    let (_, _, body) = post(&server.url("/v1/sessions"), RETAIL_TOKEN, json!({"user_id": "bob", "agent_id": "retail"}));
    let id = serde_json::from_str::<Value>(&body).unwrap()["session_id"].as_str().unwrap().to_string();
    let messages = server.url(&format!("/v1/sessions/{id}/messages"));

    let mut capture = String::new();
    for content in [
        "Please cancel order #W2001, I no longer need it. My email is bob@example.com.",
        "Yes, please go ahead.",
        STOP,
    ] {
        let (code, content_type, stream) = post(&messages, RETAIL_TOKEN, json!({"content": content}));
        assert_eq!(code, 200, "{stream}");
        assert_eq!(content_type, "text/event-stream");
        capture.push_str(&stream);
    }
    let events = parse_stream(&capture).expect("capture follows the SSE grammar");
    assert_eq!(events.last().unwrap().event, "done");
    let parsed: Vec<(String, Value)> =
        events.iter().map(|e| (e.event.clone(), serde_json::from_str(&e.data).unwrap())).collect();
    let done = &parsed.last().unwrap().1;
    let exec_id = done["exec_id"].as_str().unwrap();

    let (code, line) = get(&server.url(&format!("/v1/executions/{exec_id}/telemetry")), RETAIL_TOKEN);
    assert_eq!(code, 200);
    let log = std::fs::read_to_string(dir.path().join("telemetry.log")).unwrap();
    assert!(log.lines().any(|l| l == line), "telemetry body is the stored line");
    let record: TelemetryRecord = serde_json::from_str(&line).unwrap();
    let from_sse = op_sequence(parsed.iter().map(|(e, d)| (e.as_str(), d)));
    let from_telemetry: Vec<(u64, String)> = record.events.iter().map(|e| (e.seq, e.op.clone())).collect();
    assert_eq!(from_sse, from_telemetry);

    let (code, body) = get(&server.url(&format!("/v1/sessions/{id}/history?up_to=0")), RETAIL_TOKEN);
    assert_eq!(code, 200);
    let first: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(first.len(), 1);
    assert_eq!(first[0]["role"], "system");
    let (_, body) = get(&server.url(&format!("/v1/sessions/{id}/history")), RETAIL_TOKEN);
    let all: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert!(all.len() > 4);

    let (code, _, _) = post(&messages, RETAIL_TOKEN, json!({"content": "hello again"}));
    assert_eq!(code, 409);
}

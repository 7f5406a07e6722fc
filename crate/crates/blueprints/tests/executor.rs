use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use agent_core::config::{
    AgentConfig, BlueprintRef, ModelBinding, QuotaDimension, QuotaSpec, RetryPolicy, Toggles,
};
use agent_core::executor::{
    Conversation, ExecExit, ExecutionServices, Executor, ExecutorConfig, LaunchRequest,
    NullConversation,
};
use agent_core::protocol::{ErrorClass, ErrorInfo, ToolCall, ToolSpec};
use agent_core::providers::{
    KnowledgeStore, MockProvider, MockScript, ScriptStep, ScriptedResponse, ToolBackend,
    ToolBinding, ToolRegistry,
};
use agent_core::sandbox::{Enforcement, NetworkPolicy, RuntimeCatalog};
use serde_json::{json, Value};

const STUB: &str = env!("CARGO_BIN_EXE_bp-stub");

struct Echo;

impl ToolBackend for Echo {
    fn call(&self, _function: &str, args: &Value) -> Result<Value, String> {
        Ok(json!({"echo": args}))
    }
}

fn registry() -> Arc<ToolRegistry> {
    let mut tools = ToolRegistry::default();
    tools
        .register(
            ToolSpec {
                name: "echo".into(),
                description: "Echo the arguments.".into(),
                parameters: json!({"type": "object"}),
            },
            ToolBinding::Builtin {
                backend: Arc::new(Echo),
                function: "echo".into(),
            },
        )
        .unwrap();
    Arc::new(tools)
}

fn script(steps: Vec<ScriptStep>) -> MockScript {
    MockScript { steps }
}

fn text_step(content: &str) -> ScriptStep {
    ScriptStep::respond(ScriptedResponse::text(content))
}

struct Fixture {
    dir: tempfile::TempDir,
    executor: Executor,
}

impl Fixture {
    fn new() -> Self {
        Self::with_network(NetworkPolicy::EngineSocketOnly)
    }

    fn with_network(network: NetworkPolicy) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExecutorConfig::new(
            dir.path().join("data"),
            RuntimeCatalog::default().with("rawframe", STUB),
        );
        cfg.network = network;
        cfg.deterministic = true;
        Fixture {
            executor: Executor::new(cfg),
            dir,
        }
    }

    fn agent(&self, blueprint: Value, limits: QuotaSpec) -> AgentConfig {
        let bp_dir = self.dir.path().join("blueprint");
        std::fs::create_dir_all(&bp_dir).unwrap();
        std::fs::write(bp_dir.join("main.bp"), blueprint.to_string()).unwrap();
        AgentConfig {
            agent_id: "probe".into(),
            agent_token: "token".into(),
            policy: "Be brief.".into(),
            blueprint: BlueprintRef {
                dir: bp_dir,
                entry_file: PathBuf::from("main.bp"),
                runtime: "rawframe".into(),
            },
            model: ModelBinding {
                provider: "mock".into(),
                model: "mock-1".into(),
                script: None,
                endpoint: None,
            },
            knowledge_bases: Vec::new(),
            tool_sets: Vec::new(),
            tools: Vec::new(),
            limits,
            toggles: Toggles::default(),
            retry: RetryPolicy {
                max_retries: 2,
                backoff_base_ms: 10,
            },
            deny_users: Default::default(),
        }
    }

    fn run(&self, config: &AgentConfig, steps: Vec<ScriptStep>) -> agent_core::executor::ExecutionOutcome {
        self.run_with(config, steps, &mut NullConversation)
    }

    fn run_with(
        &self,
        config: &AgentConfig,
        steps: Vec<ScriptStep>,
        conversation: &mut dyn Conversation,
    ) -> agent_core::executor::ExecutionOutcome {
        let request = LaunchRequest {
            config,
            session_id: "s-1".into(),
            snapshot: json!([{"role": "user", "content": "hello"}]),
            services: ExecutionServices {
                llm: Box::new(MockProvider::new(script(steps))),
                knowledge: Arc::new(KnowledgeStore::default()),
                tools: registry(),
            },
        };
        self.executor.run(request, conversation)
    }

    fn blueprint_dir(&self) -> PathBuf {
        self.dir.path().join("blueprint")
    }

    fn data_dir(&self) -> &Path {
        &self.executor.config().data_dir
    }
}

fn quick_limits() -> QuotaSpec {
    QuotaSpec {
        wall_clock_seconds: 20.0,
        ..QuotaSpec::default()
    }
}

#[test]
fn events_follow_request_order() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "llm_tool_finish", "tool": "echo", "args": {"x": 1}}),
        quick_limits(),
    );
    let outcome = fx.run(&agent, vec![text_step("plan ready")]);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    assert_eq!(outcome.record.ops(), vec!["llm.invoke", "tool.call", "finish"]);
    let seqs: Vec<u64> = outcome.record.events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, vec![1, 2, 3]);
    let output = outcome.output.unwrap();
    assert_eq!(output["llm"], "plan ready");
    assert_eq!(output["tool"]["value"]["echo"]["x"], 1);
    // The record was persisted and can be found by id.
    let line = fx.executor.telemetry().lookup(&outcome.record.exec_id).unwrap().unwrap();
    assert!(line.contains("\"llm.invoke\""));
}

#[test]
fn transient_failures_are_retried_up_to_the_bound() {
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "flaky"}), quick_limits());
    let mut flaky = text_step("APPROVE");
    flaky.fail_first = 2;
    let outcome = fx.run(&agent, vec![flaky.clone()]);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    let llm = &outcome.record.events[0];
    assert_eq!(llm.op, "llm.invoke");
    assert!(llm.ok);
    assert_eq!(llm.attempts, 3);
    assert_eq!(outcome.record.retries.len(), 2);
    assert!(outcome.record.retries.iter().all(|r| r.class == ErrorClass::Transient));

    let mut tight = fx.agent(json!({"workflow": "flaky"}), quick_limits());
    tight.retry.max_retries = 1;
    let outcome = fx.run(&tight, vec![flaky]);
    let llm = &outcome.record.events[0];
    assert!(!llm.ok);
    assert_eq!(llm.attempts, 2);
    assert_eq!(outcome.record.retries.len(), 2);
    // The blueprint saw the error and finished with status "error".
    assert!(matches!(outcome.record.exit, ExecExit::Error { .. }));
}

#[test]
fn wall_clock_breach_kills_a_spinning_blueprint() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "spin"}),
        QuotaSpec {
            wall_clock_seconds: 2.0,
            ..QuotaSpec::default()
        },
    );
    let start = Instant::now();
    let outcome = fx.run(&agent, vec![]);
    let elapsed = start.elapsed();
    assert_eq!(
        outcome.record.exit,
        ExecExit::QuotaKilled {
            dimension: QuotaDimension::WallClock
        }
    );
    assert!(elapsed >= Duration::from_secs(2), "{elapsed:?}");
    assert!(elapsed <= Duration::from_secs(4), "{elapsed:?}");
}

#[test]
fn memory_breach_kills_a_ballooning_blueprint() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "balloon"}),
        QuotaSpec {
            memory_bytes: 64 * 1024 * 1024,
            wall_clock_seconds: 30.0,
            ..QuotaSpec::default()
        },
    );
    let outcome = fx.run(&agent, vec![]);
    assert_eq!(
        outcome.record.exit,
        ExecExit::QuotaKilled {
            dimension: QuotaDimension::Memory
        }
    );
    assert!(outcome.record.quota_usage.memory_bytes >= 64 * 1024 * 1024);
}

#[test]
fn frame_quota_stops_a_flooding_blueprint() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "frame_flood"}),
        QuotaSpec {
            max_protocol_frames: 50,
            ..quick_limits()
        },
    );
    let outcome = fx.run(&agent, vec![]);
    assert_eq!(
        outcome.record.exit,
        ExecExit::QuotaKilled {
            dimension: QuotaDimension::Frames
        }
    );
    assert!(outcome.record.events.len() <= 50);
}

#[test]
fn malformed_frame_is_a_fatal_protocol_error() {
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "malformed"}), quick_limits());
    let start = Instant::now();
    let outcome = fx.run(&agent, vec![]);
    assert!(start.elapsed() < Duration::from_secs(2), "{:?}", start.elapsed());
    match &outcome.record.exit {
        ExecExit::Error { error } => {
            assert_eq!(error.class, ErrorClass::Fatal);
            assert!(error.message.contains("protocol violation"), "{}", error.message);
        }
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn request_ids_must_increase() {
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "stale_ids"}), quick_limits());
    let outcome = fx.run(&agent, vec![]);
    match &outcome.record.exit {
        ExecExit::Error { error } => {
            assert_eq!(error.class, ErrorClass::Fatal);
            assert!(error.message.contains("protocol violation"), "{}", error.message);
        }
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn exit_without_finish_is_fatal() {
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "vanish", "code": 3}), quick_limits());
    let outcome = fx.run(&agent, vec![]);
    assert_eq!(outcome.record.exit_status, Some(3));
    match &outcome.record.exit {
        ExecExit::Error { error } => assert_eq!(error.class, ErrorClass::Fatal),
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn environment_is_scrubbed() {
    std::env::set_var("ENGINE_SECRET_FOR_TEST", "leak");
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "env_dump"}), quick_limits());
    let outcome = fx.run(&agent, vec![]);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    let stdout = &outcome.record.stdout.text;
    let names: Vec<&str> = stdout
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, _)| k))
        .collect();
    for name in &names {
        assert!(
            name.starts_with("AGENT_") || *name == "PATH" || *name == "HOME",
            "unexpected variable {name}"
        );
    }
    assert!(names.contains(&"AGENT_RPC_ADDR"));
    assert!(names.contains(&"AGENT_EXEC_ID"));
    assert!(names.contains(&"AGENT_DETERMINISTIC"));
    assert!(!stdout.contains("leak"));
    // Scratch is the working directory and is gone after the run.
    let cwd = outcome.output.unwrap()["cwd"].as_str().unwrap().to_string();
    assert!(cwd.starts_with(&fx.data_dir().join("scratch").display().to_string()));
    assert!(!Path::new(&cwd).exists());
}

#[test]
fn deny_policy_runs_without_an_engine_address() {
    let fx = Fixture::with_network(NetworkPolicy::Deny);
    let agent = fx.agent(json!({"workflow": "env_dump"}), quick_limits());
    let outcome = fx.run(&agent, vec![]);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    assert!(!outcome.record.stdout.text.contains("AGENT_RPC_ADDR"));
    assert!(outcome.record.stdout.text.contains("AGENT_EXEC_ID"));
}

#[test]
fn blueprint_dir_is_read_only_when_enforced() {
    let fx = Fixture::new();
    let agent = fx.agent(json!({"workflow": "write_attempt"}), quick_limits());
    let outcome = fx.run(&agent, vec![]);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    let report = outcome.output.unwrap();
    assert_eq!(report["scratch"], "allowed");
    let isolation = outcome.record.isolation.unwrap();
    if isolation.blueprint_dir_read_only == Enforcement::Enforced {
        assert_eq!(report["blueprint_dir"], "denied");
        assert_eq!(report["entry_file"], "denied");
        assert!(!fx.blueprint_dir().join("injected.txt").exists());
    } else {
        eprintln!("mount namespaces unavailable; read-only blueprint dir is advisory");
    }
}

#[test]
fn outbound_connections_fail_when_network_is_enforced() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let target = listener.local_addr().unwrap().to_string();
    for policy in [NetworkPolicy::EngineSocketOnly, NetworkPolicy::Deny] {
        let fx = Fixture::with_network(policy);
        let agent = fx.agent(json!({"workflow": "connect_attempt", "target": target}), quick_limits());
        let outcome = fx.run(&agent, vec![]);
        assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
        let isolation = outcome.record.isolation.unwrap();
        assert_eq!(isolation.network_policy, policy);
        let stdout = outcome.record.stdout.text.trim().to_string();
        if isolation.network == Enforcement::Enforced {
            assert!(stdout.starts_with("error"), "{stdout}");
        } else {
            eprintln!("network namespaces unavailable; outcome {stdout}");
        }
    }
}

#[test]
fn unsupported_runtime_is_rejected_before_launch() {
    let fx = Fixture::new();
    let mut agent = fx.agent(json!({"workflow": "echo"}), quick_limits());
    agent.blueprint.runtime = "cobol".into();
    let outcome = fx.run(&agent, vec![]);
    match &outcome.record.exit {
        ExecExit::Error { error } => {
            assert_eq!(error.class, ErrorClass::Validation);
            assert!(error.message.contains("cobol"));
        }
        other => panic!("unexpected exit {other:?}"),
    }
    assert!(outcome.record.events.is_empty());
}

#[test]
fn unreadable_entry_is_rejected() {
    let fx = Fixture::new();
    let mut agent = fx.agent(json!({"workflow": "echo"}), quick_limits());
    agent.blueprint.entry_file = PathBuf::from("missing.bp");
    let outcome = fx.run(&agent, vec![]);
    assert!(matches!(outcome.record.exit, ExecExit::Error { .. }));
}

#[test]
fn no_process_survives_an_execution() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "spin"}),
        QuotaSpec {
            wall_clock_seconds: 1.0,
            ..QuotaSpec::default()
        },
    );
    let outcome = fx.run(&agent, vec![]);
    assert!(matches!(outcome.record.exit, ExecExit::QuotaKilled { .. }));
    let children = std::process::Command::new("ps")
        .args(["-eo", "stat,args"])
        .output()
        .map(|o| String::from_utf8_lossy(&o.stdout).to_string())
        .unwrap_or_default();
    let leftover: Vec<&str> = children
        .lines()
        .filter(|l| l.contains(STUB) && l.contains(&*fx.blueprint_dir().display().to_string()))
        .collect();
    assert!(leftover.is_empty(), "{leftover:?}");
}

struct Scripted {
    replies: Vec<String>,
    sent: Vec<String>,
}

impl Conversation for Scripted {
    fn send(&mut self, _seq: u64, content: &str) -> Result<(), ErrorInfo> {
        self.sent.push(content.to_string());
        Ok(())
    }

    fn wait(&mut self, _seq: u64) -> Option<String> {
        if self.replies.is_empty() {
            None
        } else {
            Some(self.replies.remove(0))
        }
    }
}

#[test]
fn user_wait_pauses_the_wall_clock() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "echo"}),
        QuotaSpec {
            wall_clock_seconds: 1.0,
            ..QuotaSpec::default()
        },
    );
    struct Slow(Scripted);
    impl Conversation for Slow {
        fn send(&mut self, seq: u64, content: &str) -> Result<(), ErrorInfo> {
            self.0.send(seq, content)
        }
        fn wait(&mut self, seq: u64) -> Option<String> {
            std::thread::sleep(Duration::from_millis(700));
            self.0.wait(seq)
        }
    }
    let mut user = Slow(Scripted {
        replies: vec!["one".into(), "two".into(), "###STOP###".into()],
        sent: Vec::new(),
    });
    let outcome = fx.run_with(&agent, vec![], &mut user);
    assert!(outcome.is_ok(), "{:?}", outcome.record.exit);
    assert_eq!(user.0.sent, vec!["echo: hello", "echo: one", "echo: two"]);
}

#[test]
fn deterministic_runs_have_identical_canonical_traces() {
    let fx = Fixture::new();
    let agent = fx.agent(
        json!({"workflow": "llm_tool_finish", "tool": "echo", "args": {"k": [1, 2]}}),
        quick_limits(),
    );
    let steps = || {
        vec![ScriptStep::respond(ScriptedResponse {
            content: String::new(),
            tool_calls: Some(vec![ToolCall {
                name: "echo".into(),
                arguments: json!({"k": 1}),
            }]),
            finish_reason: None,
        })]
    };
    let a = fx.run(&agent, steps());
    let b = fx.run(&agent, steps());
    assert!(a.is_ok() && b.is_ok());
    assert_ne!(a.record.exec_id, b.record.exec_id);
    assert_eq!(a.record.canonical_line(), b.record.canonical_line());
}

#[test]
fn raw_frame_blueprint_in_another_language() {
    let Ok(python) = which("python3") else {
        eprintln!("python3 not available; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let bp_dir = dir.path().join("bp");
    std::fs::create_dir_all(&bp_dir).unwrap();
    std::fs::write(
        bp_dir.join("main.py"),
        r#"
import json, os, socket, struct
s = socket.socket(socket.AF_UNIX)
s.connect(os.environ["AGENT_RPC_ADDR"])
def send(doc):
    body = json.dumps(doc, separators=(",", ":")).encode()
    s.sendall(struct.pack(">I", len(body)) + body)
def recv():
    n = struct.unpack(">I", s.recv(4, socket.MSG_WAITALL))[0]
    return json.loads(s.recv(n, socket.MSG_WAITALL))
init = recv()
send({"id": 1, "kind": "request", "op": "tool.call", "payload": {"name": "echo", "args": {"from": "python"}}})
res = recv()
send({"id": 2, "kind": "finish", "payload": {"status": "ok", "output": res["payload"]}})
"#,
    )
    .unwrap();
    let mut cfg = ExecutorConfig::new(
        dir.path().join("data"),
        RuntimeCatalog::default().with("python", python),
    );
    cfg.deterministic = true;
    let executor = Executor::new(cfg);
    let fx = Fixture::new();
    let mut agent = fx.agent(json!({}), quick_limits());
    agent.blueprint = BlueprintRef {
        dir: bp_dir,
        entry_file: PathBuf::from("main.py"),
        runtime: "python".into(),
    };
    let outcome = executor.run(
        LaunchRequest {
            config: &agent,
            session_id: "s-py".into(),
            snapshot: json!([]),
            services: ExecutionServices {
                llm: Box::new(MockProvider::new(script(vec![]))),
                knowledge: Arc::new(KnowledgeStore::default()),
                tools: registry(),
            },
        },
        &mut NullConversation,
    );
    assert!(outcome.is_ok(), "{:?} {}", outcome.record.exit, outcome.record.stderr.text);
    assert_eq!(outcome.output.unwrap()["value"]["echo"]["from"], "python");
}

fn which(program: &str) -> Result<PathBuf, ()> {
    std::env::var_os("PATH")
        .into_iter()
        .flat_map(|p| std::env::split_paths(&p).collect::<Vec<_>>())
        .map(|d| d.join(program))
        .find(|p| p.is_file())
        .ok_or(())
}

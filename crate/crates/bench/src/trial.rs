//! One trial: one task, one agent setup, fresh domain state.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use agent_core::config::AgentConfig;
use agent_core::executor::{
    CapturedStream, ExecExit, ExecutionEvent, ExecutionServices, Executor, LaunchRequest, QuotaUsage,
    TelemetryRecord, TELEMETRY_VERSION,
};
use agent_core::protocol::ErrorInfo;
use agent_core::providers::{token_estimate, KnowledgeStore, MockProvider};
use agent_core::runtime::Clock;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baseline::run_baseline;
use crate::domains::{Domain, DomainBackend};
use crate::fixtures::Fixtures;
use crate::script::{baseline_script, blueprint_script};
use crate::simulator::UserSimulator;
use crate::task::Task;
use crate::variant::AgentSetup;
use crate::BenchError;

/// A count per dialogue role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleCounts {
    pub system: u64,
    pub user: u64,
    pub assistant: u64,
    pub tool: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRef {
    pub log: PathBuf,
    pub exec_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub task_id: String,
    pub domain: Domain,
    pub setup: AgentSetup,
    pub trial: u32,
    pub success: bool,
    pub turns: RoleCounts,
    pub tokens: RoleCounts,
    pub tool_calls: u64,
    pub final_state_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub trace: TraceRef,
}

impl TrialResult {
    /// The result without the fields that identify a particular run.
    pub fn comparable(&self) -> Value {
        let mut doc = serde_json::to_value(self).expect("trial result serializes");
        if let Some(obj) = doc.as_object_mut() {
            obj.remove("trial");
            obj.remove("trace");
        }
        doc
    }
}

/// Accumulates per-role turns and tokens from the documents the agent
/// received for each op.
#[derive(Debug, Default)]
struct Counter {
    turns: RoleCounts,
    tokens: RoleCounts,
    assistant_messages: Vec<String>,
    failures: Vec<String>,
}

impl Counter {
    fn observe(&mut self, op: &str, ok: bool, summary: &Value, answer: &Value) {
        match op {
            "llm.invoke" if ok => {
                self.turns.assistant += 1;
                self.tokens.assistant += answer["usage"]["completion_tokens"].as_u64().unwrap_or(0);
            }
            "tool.call" | "kb.query" => {
                self.turns.tool += 1;
                self.tokens.tool += token_estimate(&answer.to_string());
            }
            "user.send" if ok => {
                self.assistant_messages.push(summary["content"].as_str().unwrap_or("").to_string());
            }
            _ => {}
        }
        if !ok {
            let error = summary["error"]["message"].as_str().or(summary["error"].as_str()).unwrap_or("failed");
            self.failures.push(format!("{op}: {error}"));
        }
    }
}

struct SimConversation {
    user: UserSimulator,
    counter: Counter,
}

impl agent_core::executor::Conversation for SimConversation {
    fn send(&mut self, _seq: u64, _content: &str) -> Result<(), ErrorInfo> {
        Ok(())
    }

    fn wait(&mut self, _seq: u64) -> Option<String> {
        let last = self.counter.assistant_messages.last().cloned().unwrap_or_default();
        Some(self.user.respond(&last))
    }

    fn observe(&mut self, event: &ExecutionEvent<'_>) {
        if let ExecutionEvent::Op { event, result, .. } = event {
            let answer = if result.ok == Some(true) { &result.payload } else { &Value::Null };
            self.counter.observe(&event.op, event.ok, &event.summary, answer);
        }
    }
}

/// Everything trials share: fixtures, the engine, per-domain agent configs
/// and knowledge bases.
pub struct TrialEnv {
    executor: Executor,
    clock: Clock,
    states: BTreeMap<Domain, Value>,
    agents: BTreeMap<Domain, AgentConfig>,
    knowledge: BTreeMap<Domain, Arc<KnowledgeStore>>,
}

impl TrialEnv {
    pub fn new(fixtures: &Fixtures, executor: Executor) -> Result<Self, BenchError> {
        let mut env = TrialEnv {
            clock: Clock::new(executor.config().deterministic),
            executor,
            states: BTreeMap::new(),
            agents: BTreeMap::new(),
            knowledge: BTreeMap::new(),
        };
        for domain in Domain::BENCHMARKED {
            let config = fixtures.agent_config(domain)?;
            config.validate(&env.executor.runtime_tags())?;
            env.knowledge.insert(domain, Arc::new(Fixtures::knowledge(&config)?));
            env.agents.insert(domain, config);
            env.states.insert(domain, fixtures.state(domain)?);
        }
        Ok(env)
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn initial_state(&self, domain: Domain) -> &Value {
        &self.states[&domain]
    }

    pub fn run_trial(&self, task: &Task, setup: AgentSetup, trial: u32) -> TrialResult {
        let backend = DomainBackend::new(task.domain, self.states[&task.domain].clone());
        let config = &self.agents[&task.domain];
        let mut user = UserSimulator::new(&task.user_script);
        let first = user.first();
        let session_id = format!("{}.{}.t{trial}", task.task_id, setup.label());

        let (record, counter, user) = if setup.variant.is_baseline() {
            let mut counter = Counter::default();
            let started_at = self.clock.now();
            let mut llm = MockProvider::new(baseline_script(task, setup.variant));
            let run = run_baseline(
                setup.variant,
                &config.policy,
                first,
                &mut llm,
                &backend.registry(false),
                &mut user,
                &mut |event, answer| counter.observe(&event.op, event.ok, &event.summary, answer),
            );
            let record = TelemetryRecord {
                v: TELEMETRY_VERSION,
                exec_id: format!("{}-{session_id}", setup.variant),
                agent_id: format!("{}-{}", setup.variant, task.domain),
                session_id,
                started_at,
                ended_at: self.clock.now(),
                exit: match run.error {
                    Some(error) => ExecExit::Error { error },
                    None => ExecExit::Ok,
                },
                exit_status: None,
                quota_usage: QuotaUsage::default(),
                isolation: None,
                events: run.events,
                stdout: CapturedStream { text: String::new(), truncated: false },
                stderr: CapturedStream { text: String::new(), truncated: false },
                retries: Vec::new(),
            };
            if let Err(e) = self.executor.telemetry().append(&record) {
                counter.failures.push(format!("telemetry write failed: {e}"));
            }
            (record, counter, user)
        } else {
            let mut config = config.clone();
            config.toggles = setup.toggles();
            let script = blueprint_script(task).for_toggles(&config.toggles);
            let snapshot = json!([
                {"role": "system", "content": config.policy},
                {"role": "user", "content": first},
            ]);
            let services = ExecutionServices {
                llm: Box::new(MockProvider::new(script)),
                knowledge: self.knowledge[&task.domain].clone(),
                tools: Arc::new(backend.registry(setup.rt)),
            };
            let mut conversation = SimConversation { user, counter: Counter::default() };
            let outcome = self.executor.run(
                LaunchRequest { config: &config, session_id, snapshot, services },
                &mut conversation,
            );
            (outcome.record, conversation.counter, conversation.user)
        };

        let mut turns = counter.turns;
        let mut tokens = counter.tokens;
        turns.system = 1;
        tokens.system = token_estimate(&config.policy);
        turns.user = user.said().len() as u64;
        tokens.user = user.said().iter().map(|s| token_estimate(s)).sum();

        let final_state_hash = backend.hash();
        let expected = &task.expected.state_hash;
        let transcript = counter.assistant_messages.join("\n");
        let missing: Vec<&str> = task
            .required_outputs
            .iter()
            .filter(|o| !transcript.contains(o.as_str()))
            .map(String::as_str)
            .collect();
        let success = final_state_hash == *expected && missing.is_empty();

        let mut problems = Vec::new();
        if let ExecExit::Error { error } = &record.exit {
            problems.push(format!("execution failed: {}", error.message));
        }
        if let ExecExit::QuotaKilled { dimension } = &record.exit {
            problems.push(format!("quota exceeded: {dimension}"));
        }
        problems.extend(counter.failures);
        if final_state_hash != *expected {
            problems.push("final state differs from the expected state".into());
        }
        if !missing.is_empty() {
            problems.push(format!("missing outputs: {}", missing.join(", ")));
        }

        TrialResult {
            task_id: task.task_id.clone(),
            domain: task.domain,
            setup,
            trial,
            success,
            turns,
            tokens,
            tool_calls: record.count_op("tool.call") as u64,
            final_state_hash,
            diagnostic: (!problems.is_empty()).then(|| problems.join("; ")),
            trace: TraceRef {
                log: self.executor.telemetry().path().to_path_buf(),
                exec_id: record.exec_id.clone(),
            },
        }
    }
}

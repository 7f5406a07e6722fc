//! Single executions of the stub interpreter's probe workflows.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use agent_core::config::{AgentConfig, BlueprintRef, ModelBinding, QuotaSpec, RetryPolicy, Toggles};
use agent_core::executor::{ExecutionOutcome, ExecutionServices, Executor, ExecutorConfig, LaunchRequest, NullConversation};
use agent_core::providers::{KnowledgeStore, MockProvider, MockScript, ScriptStep, ToolRegistry};
use agent_core::sandbox::RuntimeCatalog;
use serde_json::{json, Value};

pub struct Probe {
    dir: tempfile::TempDir,
    executor: Executor,
}

impl Probe {
    pub fn new() -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let interpreter = agent_bench::self_interpreter().map_err(|e| e.to_string())?;
        let mut runtimes = RuntimeCatalog::default();
        runtimes.runtimes.insert(agent_blueprints::RUNTIME_TAG.to_string(), interpreter);
        let mut config = ExecutorConfig::new(dir.path().join("data"), runtimes);
        config.deterministic = true;
        Ok(Probe { executor: Executor::new(config), dir })
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn blueprint_dir(&self) -> PathBuf {
        self.dir.path().join("blueprint")
    }

    pub fn agent(&self, blueprint: Value, limits: QuotaSpec, max_retries: u32) -> AgentConfig {
        let bp_dir = self.blueprint_dir();
        std::fs::create_dir_all(&bp_dir).expect("blueprint dir");
        std::fs::write(bp_dir.join("main.bp"), blueprint.to_string()).expect("blueprint file");
        AgentConfig {
            agent_id: "probe".into(),
            agent_token: "probe-token".into(),
            policy: "Be brief.".into(),
            blueprint: BlueprintRef {
                dir: bp_dir,
                entry_file: PathBuf::from("main.bp"),
                runtime: agent_blueprints::RUNTIME_TAG.into(),
            },
            model: ModelBinding { provider: "mock".into(), model: "mock-1".into(), script: None, endpoint: None },
            knowledge_bases: Vec::new(),
            tool_sets: Vec::new(),
            tools: Vec::new(),
            limits,
            toggles: Toggles::default(),
            retry: RetryPolicy { max_retries, backoff_base_ms: 10 },
            deny_users: Default::default(),
        }
    }

    pub fn run(&self, config: &AgentConfig, steps: Vec<ScriptStep>) -> ExecutionOutcome {
        let request = LaunchRequest {
            config,
            session_id: "probe-session".into(),
            snapshot: json!([{"role": "user", "content": "hello"}]),
            services: ExecutionServices {
                llm: Box::new(MockProvider::new(MockScript { steps })),
                knowledge: Arc::new(KnowledgeStore::default()),
                tools: Arc::new(ToolRegistry::default()),
            },
        };
        self.executor.run(request, &mut NullConversation)
    }
}

/// Live processes whose command line mentions `needle`.
pub fn processes_mentioning(needle: &Path) -> Vec<String> {
    let needle = needle.display().to_string();
    let Ok(entries) = std::fs::read_dir("/proc") else {
        return Vec::new();
    };
    entries
        .flatten()
        .filter(|e| e.file_name().to_string_lossy().chars().all(|c| c.is_ascii_digit()))
        .filter_map(|e| {
            let cmdline = std::fs::read(e.path().join("cmdline")).ok()?;
            let text = String::from_utf8_lossy(&cmdline).replace('\0', " ");
            text.contains(&needle).then(|| format!("{}: {}", e.file_name().to_string_lossy(), text.trim()))
        })
        .collect()
}

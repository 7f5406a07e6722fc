//! Loader for the versioned fixture tree: domain states, tasks, knowledge
//! base documents, blueprints and agent configs.

use std::path::{Path, PathBuf};

use agent_core::config::AgentConfig;
use agent_core::providers::{KnowledgeBase, KnowledgeStore};
use serde_json::Value;

use crate::domains::Domain;
use crate::task::Task;
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct Fixtures {
    root: PathBuf,
}

impl Default for Fixtures {
    fn default() -> Self {
        Fixtures::new(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
    }
}

fn read_json(path: &Path) -> Result<Value, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::fixture(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::fixture(path, e))
}

impl Fixtures {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Fixtures { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn state(&self, domain: Domain) -> Result<Value, BenchError> {
        read_json(&self.root.join(domain.name()).join("state.json"))
    }

    pub fn tasks_path(&self, domain: Domain) -> PathBuf {
        self.root.join(domain.name()).join("tasks.json")
    }

    pub fn tasks(&self, domain: Domain) -> Result<Vec<Task>, BenchError> {
        let path = self.tasks_path(domain);
        let mut doc = read_json(&path)?;
        let tasks = doc["tasks"].as_array_mut().ok_or_else(|| BenchError::fixture(&path, "missing `tasks` array"))?;
        tasks
            .iter_mut()
            .map(|task| {
                task["domain"] = Value::String(domain.name().into());
                serde_json::from_value(task.take()).map_err(|e| BenchError::fixture(&path, e))
            })
            .collect()
    }

    /// Tasks of every benchmarked domain, retail first.
    pub fn all_tasks(&self) -> Result<Vec<Task>, BenchError> {
        let mut all = Vec::new();
        for domain in Domain::BENCHMARKED {
            all.extend(self.tasks(domain)?);
        }
        Ok(all)
    }

    pub fn agent_path(&self, domain: Domain) -> PathBuf {
        let name = match domain {
            Domain::Ops => "oom",
            other => other.name(),
        };
        self.root.join("agents").join(format!("{name}.toml"))
    }

    pub fn agent_config(&self, domain: Domain) -> Result<AgentConfig, BenchError> {
        Ok(AgentConfig::load(&self.agent_path(domain))?)
    }

    pub fn kb_dir(&self, domain: Domain) -> PathBuf {
        self.root.join(domain.name()).join("kb")
    }

    /// Knowledge bases bound in `config`.
    pub fn knowledge(config: &AgentConfig) -> Result<KnowledgeStore, BenchError> {
        let mut store = KnowledgeStore::default();
        for binding in &config.knowledge_bases {
            let kb = KnowledgeBase::ingest_dir(binding.id.clone(), &binding.dir)
                .map_err(|e| BenchError::fixture(&binding.dir, e))?;
            store.insert(kb);
        }
        Ok(store)
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.manifest")
    }
}

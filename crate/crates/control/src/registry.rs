//! Registered agents, loaded from a directory of agent config files.

use std::collections::BTreeMap;
use std::path::Path;

use agent_core::config::{AgentConfig, ConfigError};

#[derive(Debug, Clone, Default)]
pub struct AgentRegistry {
    agents: BTreeMap<String, AgentConfig>,
}

impl AgentRegistry {
    /// Load every `*.toml` file in `dir`, validating each against the
    /// runtimes the engine supports.
    pub fn load_dir(dir: &Path, runtime_tags: &[&str]) -> Result<Self, ConfigError> {
        let mut registry = AgentRegistry::default();
        let entries = std::fs::read_dir(dir).map_err(|e| ConfigError::Read {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let config = AgentConfig::load(&path)?;
            registry.insert(config, runtime_tags)?;
        }
        Ok(registry)
    }

    pub fn insert(&mut self, config: AgentConfig, runtime_tags: &[&str]) -> Result<(), ConfigError> {
        config.validate(runtime_tags)?;
        self.agents.insert(config.agent_id.clone(), config);
        Ok(())
    }

    pub fn get(&self, agent_id: &str) -> Option<&AgentConfig> {
        self.agents.get(agent_id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.agents.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

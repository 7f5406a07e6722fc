//! Declarative agent configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid agent config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaDimension {
    Cpu,
    Memory,
    WallClock,
    Frames,
}

impl QuotaDimension {
    pub fn as_str(self) -> &'static str {
        match self {
            QuotaDimension::Cpu => "cpu",
            QuotaDimension::Memory => "memory",
            QuotaDimension::WallClock => "wall_clock",
            QuotaDimension::Frames => "frames",
        }
    }
}

impl fmt::Display for QuotaDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-execution resource limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuotaSpec {
    pub cpu_seconds: f64,
    pub memory_bytes: u64,
    pub wall_clock_seconds: f64,
    pub max_protocol_frames: u64,
    pub max_stdout_bytes: u64,
}

impl Default for QuotaSpec {
    fn default() -> Self {
        QuotaSpec {
            cpu_seconds: 30.0,
            memory_bytes: 512 * 1024 * 1024,
            wall_clock_seconds: 120.0,
            max_protocol_frames: 10_000,
            max_stdout_bytes: 1024 * 1024,
        }
    }
}

impl QuotaSpec {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.cpu_seconds) {
            return Err("cpu_seconds must be > 0".into());
        }
        if !positive(self.wall_clock_seconds) {
            return Err("wall_clock_seconds must be > 0".into());
        }
        if self.memory_bytes == 0 {
            return Err("memory_bytes must be > 0".into());
        }
        if self.max_protocol_frames == 0 {
            return Err("max_protocol_frames must be > 0".into());
        }
        if self.max_stdout_bytes == 0 {
            return Err("max_stdout_bytes must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            backoff_base_ms: 200,
        }
    }
}

/// Workflow toggles: the double-check gate and consolidated domain tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub dc_enabled: bool,
    pub consolidated_tools: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            dc_enabled: true,
            consolidated_tools: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlueprintRef {
    pub dir: PathBuf,
    /// Relative to `dir`.
    pub entry_file: PathBuf,
    pub runtime: String,
}

impl BlueprintRef {
    pub fn entry_path(&self) -> PathBuf {
        self.dir.join(&self.entry_file)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join("blueprint.manifest")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBinding {
    /// `mock`, `loopback`, or `live` (requires the `live` feature).
    pub provider: String,
    pub model: String,
    /// Mock script path for the `mock` provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    /// Endpoint for the `live` provider.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeBaseBinding {
    pub id: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ToolBindingSpec {
    /// Domain function id resolved by a tool backend.
    Builtin(String),
    /// `unix:/path/to.sock` or `tcp:host:port`.
    Remote(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolRegistration {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub parameters: Value,
    pub binding: ToolBindingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub agent_id: String,
    pub agent_token: String,
    /// System prompt / policy text placed at turn 0.
    #[serde(default)]
    pub policy: String,
    pub blueprint: BlueprintRef,
    pub model: ModelBinding,
    #[serde(default)]
    pub knowledge_bases: Vec<KnowledgeBaseBinding>,
    /// Built-in domain tool sets, e.g. `retail`.
    #[serde(default)]
    pub tool_sets: Vec<String>,
    #[serde(default)]
    pub tools: Vec<ToolRegistration>,
    #[serde(default)]
    pub limits: QuotaSpec,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub deny_users: BTreeSet<String>,
}

/// Absolute directory of a config file, so resolved paths stay valid in a
/// child process with another working directory.
pub fn config_base(path: &Path) -> PathBuf {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf())
}

impl AgentConfig {
    /// Load a TOML config; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: AgentConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.resolve_paths(&config_base(path));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.blueprint.dir);
        if let Some(script) = self.model.script.as_mut() {
            resolve(script);
        }
        for kb in &mut self.knowledge_bases {
            resolve(&mut kb.dir);
        }
    }

    /// Structural checks. Entry-file readability is checked at launch.
    pub fn validate(&self, supported_runtimes: &[&str]) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.agent_id.is_empty() {
            return invalid("agent_id is empty".into());
        }
        if self.agent_token.is_empty() {
            return invalid("agent_token is empty".into());
        }
        if !supported_runtimes.contains(&self.blueprint.runtime.as_str()) {
            return invalid(format!(
                "runtime `{}` is not supported (expected one of {supported_runtimes:?})",
                self.blueprint.runtime
            ));
        }
        if self.blueprint.entry_file.is_absolute()
            || self
                .blueprint
                .entry_file
                .components()
                .any(|c| matches!(c, std::path::Component::ParentDir))
        {
            return invalid("entry_file must be a relative path inside the blueprint dir".into());
        }
        let entry = self.blueprint.entry_path();
        if !entry.is_file() {
            return invalid(format!("entry file {} does not exist", entry.display()));
        }
        self.limits.validate().map_err(ConfigError::Invalid)?;
        let mut seen = BTreeSet::new();
        for tool in &self.tools {
            crate::protocol::validate_tool_name(&tool.name).map_err(ConfigError::Invalid)?;
            if !seen.insert(tool.name.as_str()) {
                return invalid(format!("duplicate tool `{}`", tool.name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quota_defaults() {
        let q = QuotaSpec::default();
        assert_eq!(q.cpu_seconds, 30.0);
        assert_eq!(q.memory_bytes, 512 * 1024 * 1024);
        assert_eq!(q.wall_clock_seconds, 120.0);
        assert_eq!(q.max_protocol_frames, 10_000);
        assert_eq!(q.max_stdout_bytes, 1024 * 1024);
        assert!(q.validate().is_ok());
        assert!(QuotaSpec {
            wall_clock_seconds: 0.0,
            ..q
        }
        .validate()
        .is_err());
    }

    #[test]
    fn toggles_and_retry_default() {
        let t: Toggles = toml::from_str("").unwrap();
        assert!(t.dc_enabled && t.consolidated_tools);
        let r: RetryPolicy = toml::from_str("").unwrap();
        assert_eq!((r.max_retries, r.backoff_base_ms), (2, 200));
    }

    #[test]
    fn config_base_is_absolute() {
        assert!(config_base(Path::new("agent.toml")).is_absolute());
        assert!(config_base(Path::new("agents/retail.toml")).ends_with("agents"));
        assert_eq!(config_base(Path::new("/etc/agents/a.toml")), Path::new("/etc/agents"));
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("bp")).unwrap();
        std::fs::write(dir.path().join("bp/main.bp"), "{}").unwrap();
        let path = dir.path().join("agent.toml");
        std::fs::write(
            &path,
            r#"
agent_id = "a1"
agent_token = "secret"
[blueprint]
dir = "bp"
entry_file = "main.bp"
runtime = "rawframe"
[model]
provider = "mock"
model = "mock-1"
script = "script.json"
"#,
        )
        .unwrap();
        let config = AgentConfig::load(&path).unwrap();
        assert_eq!(config.blueprint.dir, dir.path().join("bp"));
        assert_eq!(config.model.script, Some(dir.path().join("script.json")));
        assert!(config.validate(&["rawframe"]).is_ok());
        assert!(config.validate(&["python3"]).is_err());

        let mut escaping = config.clone();
        escaping.blueprint.entry_file = "../agent.toml".into();
        assert!(escaping.validate(&["rawframe"]).is_err());
    }
}

//! `agentd` configuration and startup.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agent_bench::{executor_config, Fixtures};
use agent_core::config::config_base;
use agent_core::executor::Executor;
use agent_core::sandbox::RuntimeDef;
use serde::Deserialize;

use crate::gateway::Gateway;
use crate::registry::AgentRegistry;
use crate::services::DomainServices;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7700";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaemonConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Directory of agent config files.
    pub registry: PathBuf,
    /// Domain states and the dependency catalog; the bundled fixtures when absent.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    /// Interpreter for the `rawframe` runtime; this binary when absent.
    #[serde(default)]
    pub interpreter: Option<RuntimeDef>,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_listen() -> SocketAddr {
    DEFAULT_LISTEN.parse().expect("valid default address")
}

impl DaemonConfig {
    /// Load from a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut config: DaemonConfig = toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))?;
        let base = config_base(path);
        for p in [&mut config.data_dir, &mut config.registry] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = config.fixtures.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(config)
    }
}

/// Build the gateway described by `config`. `interpreter` is used when the
/// config names none.
pub fn build_gateway(config: &DaemonConfig, interpreter: RuntimeDef) -> Result<Gateway, String> {
    let fixtures = config.fixtures.clone().map(Fixtures::new).unwrap_or_default();
    let interpreter = config.interpreter.clone().unwrap_or(interpreter);
    std::fs::create_dir_all(&config.data_dir).map_err(|e| e.to_string())?;
    let executor_config =
        executor_config(&fixtures, &config.data_dir, interpreter, config.deterministic).map_err(|e| e.to_string())?;
    let executor = Executor::new(executor_config);
    let registry = AgentRegistry::load_dir(&config.registry, &executor.runtime_tags()).map_err(|e| e.to_string())?;
    let services = Arc::new(DomainServices::new(fixtures));
    Gateway::new(executor, registry, services, &config.data_dir.join("sessions")).map_err(|e| e.to_string())
}

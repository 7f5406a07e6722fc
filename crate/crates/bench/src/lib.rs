//! Desk-scale benchmark harness: mini retail and airline domains, a scripted
//! user, function-calling / ReAct / Act baselines, the blueprint agent run
//! through the engine, pass^k metrics, ablations and reports.

pub mod baseline;
pub mod cli;
pub mod domains;
pub mod fixtures;
pub mod harness;
pub mod metrics;
pub mod replay;
pub mod report;
pub mod script;
pub mod simulator;
pub mod sse;
pub mod task;
pub mod trial;
pub mod variant;

use std::path::{Path, PathBuf};

use agent_core::config::ConfigError;
use agent_core::executor::{Executor, ExecutorConfig};
use agent_core::sandbox::{DependencyCatalog, RuntimeCatalog, RuntimeDef};
use thiserror::Error;

pub use domains::Domain;
pub use fixtures::Fixtures;
pub use task::Task;
pub use trial::{TrialEnv, TrialResult};
pub use variant::{AgentSetup, Variant};

/// Hidden `agentctl` subcommand that runs the blueprint interpreter.
pub const INTERPRET_SUBCOMMAND: &str = "__interpret";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("server: {0}")]
    Server(String),
}

impl BenchError {
    pub fn fixture(path: &Path, message: impl std::fmt::Display) -> Self {
        BenchError::Fixture {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

/// The running `agentctl` binary as the `rawframe` interpreter.
pub fn self_interpreter() -> Result<RuntimeDef, BenchError> {
    Ok(RuntimeDef {
        program: std::env::current_exe()?,
        args: vec![INTERPRET_SUBCOMMAND.to_string()],
    })
}

/// Engine settings for a benchmark run writing into `out_dir`.
pub fn executor_config(
    fixtures: &Fixtures,
    out_dir: &Path,
    interpreter: RuntimeDef,
    deterministic: bool,
) -> Result<ExecutorConfig, BenchError> {
    let mut runtimes = RuntimeCatalog::default();
    runtimes.runtimes.insert(agent_blueprints::RUNTIME_TAG.to_string(), interpreter);
    let mut config = ExecutorConfig::new(out_dir, runtimes);
    let catalog_path = fixtures.catalog_path();
    config.catalog = Some(DependencyCatalog::load(&catalog_path).map_err(|e| BenchError::fixture(&catalog_path, e))?);
    config.deterministic = deterministic;
    Ok(config)
}

/// Trial environment over a fresh telemetry log in `out_dir`.
pub fn open_env(
    fixtures: &Fixtures,
    out_dir: &Path,
    interpreter: RuntimeDef,
    deterministic: bool,
) -> Result<TrialEnv, BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let log = out_dir.join("telemetry.log");
    if log.exists() {
        std::fs::remove_file(&log)?;
    }
    let config = executor_config(fixtures, out_dir, interpreter, deterministic)?;
    TrialEnv::new(fixtures, Executor::new(config))
}

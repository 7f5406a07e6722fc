#![allow(dead_code)]

use std::path::Path;

use agent_bench::{open_env, Fixtures, TrialEnv, INTERPRET_SUBCOMMAND};
use agent_core::executor::TelemetryRecord;
use agent_core::sandbox::RuntimeDef;

pub fn interpreter() -> RuntimeDef {
    RuntimeDef {
        program: env!("CARGO_BIN_EXE_agentctl").into(),
        args: vec![INTERPRET_SUBCOMMAND.to_string()],
    }
}

pub fn env(out: &Path) -> TrialEnv {
    open_env(&Fixtures::default(), out, interpreter(), true).unwrap()
}

pub fn record(env: &TrialEnv, exec_id: &str) -> TelemetryRecord {
    let line = env.executor().telemetry().lookup(exec_id).unwrap().expect("trace recorded");
    serde_json::from_str(&line).unwrap()
}

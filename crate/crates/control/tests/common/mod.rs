#![allow(dead_code)]

use std::path::{Path, PathBuf};

use agent_bench::INTERPRET_SUBCOMMAND;
use agent_control::daemon::{build_gateway, DaemonConfig, DEFAULT_LISTEN};
use agent_control::{EventStream, Gateway, SseRecord};
use agent_core::sandbox::RuntimeDef;

pub const RETAIL_TOKEN: &str = "retail-demo-token";
pub const AIRLINE_TOKEN: &str = "airline-demo-token";
pub const STOP: &str = "###STOP###";

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo")
}

pub fn interpreter() -> RuntimeDef {
    RuntimeDef {
        program: env!("CARGO_BIN_EXE_agentd").into(),
        args: vec![INTERPRET_SUBCOMMAND.to_string()],
    }
}

pub fn config(data_dir: &Path) -> DaemonConfig {
    DaemonConfig {
        listen: DEFAULT_LISTEN.parse().unwrap(),
        data_dir: data_dir.to_path_buf(),
        registry: demo_dir().join("agents"),
        fixtures: None,
        interpreter: None,
        deterministic: true,
    }
}

pub fn gateway(data_dir: &Path) -> Gateway {
    build_gateway(&config(data_dir), interpreter()).unwrap()
}

/// Every record of a stream, until the gateway closes it.
pub fn drain(mut stream: EventStream) -> Vec<SseRecord> {
    let mut out = Vec::new();
    while let Some(record) = stream.blocking_recv() {
        out.push(record);
    }
    out
}

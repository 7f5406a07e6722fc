//! Benchmark trials run in-process against the fixture tasks.

use agent_bench::harness::{jobs, run_jobs, DEFAULT_CONCURRENCY};
use agent_bench::{open_env, self_interpreter, AgentSetup, Fixtures, Task, TrialEnv, TrialResult};
use agent_core::executor::TelemetryRecord;

pub struct BenchEnv {
    _dir: tempfile::TempDir,
    pub env: TrialEnv,
    pub tasks: Vec<Task>,
}

impl BenchEnv {
    pub fn open() -> Result<Self, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let fixtures = Fixtures::default();
        let interpreter = self_interpreter().map_err(|e| e.to_string())?;
        let env = open_env(&fixtures, dir.path(), interpreter, true).map_err(|e| e.to_string())?;
        let tasks = fixtures.all_tasks().map_err(|e| e.to_string())?;
        Ok(BenchEnv { _dir: dir, env, tasks })
    }

    pub fn task(&self, id: &str) -> Result<&Task, String> {
        self.tasks.iter().find(|t| t.task_id == id).ok_or_else(|| format!("no fixture task {id}"))
    }

    pub fn run(&self, tasks: &[Task], setups: &[AgentSetup], trials: u32) -> Vec<TrialResult> {
        run_jobs(&self.env, &jobs(tasks, setups, trials), DEFAULT_CONCURRENCY)
    }

    pub fn record(&self, result: &TrialResult) -> Result<TelemetryRecord, String> {
        let line = self
            .env
            .executor()
            .telemetry()
            .lookup(&result.trace.exec_id)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("no telemetry record {}", result.trace.exec_id))?;
        serde_json::from_str(&line).map_err(|e| e.to_string())
    }
}

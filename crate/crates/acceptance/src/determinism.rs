use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use agent_bench::metrics::variance;
use agent_bench::TrialResult;
use agent_core::executor::TelemetryRecord;

use crate::{ensure, Outcome, AGENTCTL_SUBCOMMAND};

const TRIALS: u32 = 5;
const TASKS: usize = 20;
const BUDGET: Duration = Duration::from_secs(120);

pub fn check() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let run = Command::new(exe)
        .args([AGENTCTL_SUBCOMMAND, "bench", "run", "--variant", "blueprint", "--baseline", "none"])
        .args(["--trials", &TRIALS.to_string()])
        .arg("--out")
        .arg(out.path())
        .env("AGENT_DETERMINISTIC", "1")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(
        run.status.code().is_some_and(|c| c == 0 || c == 1),
        "agentctl bench run exited with {:?}: {}",
        run.status,
        String::from_utf8_lossy(&run.stderr)
    );
    ensure!(elapsed < BUDGET, "bench run took {elapsed:?}");

    let read = |name: &str| std::fs::read_to_string(out.path().join(name)).map_err(|e| format!("{name}: {e}"));
    let results: Vec<TrialResult> = read("results.jsonl")?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("results.jsonl: {e}"))?;
    let records: BTreeMap<String, TelemetryRecord> = read("telemetry.log")?
        .lines()
        .map(|l| serde_json::from_str::<TelemetryRecord>(l).map(|r| (r.exec_id.clone(), r)))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("telemetry.log: {e}"))?;

    let mut by_task: BTreeMap<&str, Vec<&TrialResult>> = BTreeMap::new();
    for r in &results {
        by_task.entry(r.task_id.as_str()).or_default().push(r);
    }
    ensure!(by_task.len() == TASKS, "results cover {} tasks", by_task.len());
    for (task, trials) in &by_task {
        ensure!(trials.len() == TRIALS as usize, "{task} has {} trials", trials.len());
        let first = trials[0].comparable();
        ensure!(trials.iter().all(|t| t.comparable() == first), "{task}: trial results differ");
        let traces: Vec<String> = trials
            .iter()
            .map(|t| records.get(&t.trace.exec_id).map(TelemetryRecord::canonical_line).ok_or_else(|| format!("{task}: no trace {}", t.trace.exec_id)))
            .collect::<Result<_, _>>()?;
        ensure!(traces.iter().all(|t| *t == traces[0]), "{task}: canonical traces differ");
    }
    let mut by_trial: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for r in &results {
        let (passed, total) = by_trial.entry(r.trial).or_default();
        *passed += usize::from(r.success);
        *total += 1;
    }
    ensure!(by_trial.len() == TRIALS as usize, "results carry {} trial indices", by_trial.len());
    let per_trial: Vec<f64> = by_trial.values().map(|&(passed, total)| passed as f64 / total as f64 * 100.0).collect();
    let v = variance(&per_trial);
    ensure!(v == 0.0, "pass^1 per trial {per_trial:?} has variance {v}");
    Ok(format!(
        "{TRIALS} trials x {TASKS} tasks identical, pass^1 {:.1} each trial (variance 0), traces byte-identical, {:.1}s",
        per_trial[0],
        elapsed.as_secs_f64()
    ))
}

use agent_bench::metrics::{reduction_percent, round1};
use agent_bench::task::BaselineStep;
use agent_bench::{AgentSetup, Variant};

use crate::bench_env::BenchEnv;
use crate::{ensure, Outcome};

const EXCHANGE_TASK: &str = "retail-87";
const BLUEPRINT_CALLS: u64 = 2;

pub fn check() -> Outcome {
    let bench = BenchEnv::open()?;
    let task = bench.task(EXCHANGE_TASK)?.clone();
    let scripted = task.baseline.iter().filter(|s| matches!(s, BaselineStep::Tool { .. })).count() as u64;
    let results = bench.run(
        std::slice::from_ref(&task),
        &[AgentSetup::blueprint(true, true), AgentSetup::baseline(Variant::Fc)],
        1,
    );
    let [blueprint, fc] = results.as_slice() else {
        return Err(format!("expected two trials, got {}", results.len()));
    };
    ensure!(blueprint.success, "blueprint trial failed: {:?}", blueprint.diagnostic);
    ensure!(blueprint.tool_calls == BLUEPRINT_CALLS, "blueprint used {} tool calls", blueprint.tool_calls);
    ensure!(fc.tool_calls == scripted, "fc used {} tool calls, its trajectory scripts {scripted}", fc.tool_calls);
    ensure!(fc.tool_calls >= 8, "fc used only {} tool calls", fc.tool_calls);
    let reduction = reduction_percent(fc.tool_calls, blueprint.tool_calls).map_err(|e| e.to_string())?;
    ensure!(reduction >= 70.0, "reduction {reduction:.1}% is below 70%");
    Ok(format!(
        "{EXCHANGE_TASK}: blueprint[dc,rt] {} calls, fc {} calls, reduction {:.1}%",
        blueprint.tool_calls,
        fc.tool_calls,
        round1(reduction)
    ))
}

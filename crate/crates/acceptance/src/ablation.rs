use std::collections::BTreeMap;

use agent_bench::harness::{ablation_setups, parse_grid};
use agent_bench::{AgentSetup, Domain, TrialResult, Variant};

use crate::bench_env::BenchEnv;
use crate::{ensure, Outcome};

fn pass1(results: &[TrialResult], setup: AgentSetup, domain: Domain) -> f64 {
    let rows: Vec<&TrialResult> = results.iter().filter(|r| r.setup == setup && r.domain == domain).collect();
    rows.iter().filter(|r| r.success).count() as f64 / rows.len().max(1) as f64 * 100.0
}

pub fn check() -> Outcome {
    let bench = BenchEnv::open()?;
    let setups = ablation_setups(&parse_grid("sca,dc,rt").map_err(|e| e.to_string())?);
    let results = bench.run(&bench.tasks, &setups, 1);

    let conflicts: Vec<&str> = bench.tasks.iter().filter(|t| t.tags.iter().any(|g| g == "conflict")).map(|t| t.task_id.as_str()).collect();
    ensure!(conflicts.len() == 2, "expected two conflict tasks, found {conflicts:?}");
    for task in &conflicts {
        for rt in [false, true] {
            let outcome = |dc: bool| {
                results
                    .iter()
                    .find(|r| r.task_id == *task && r.setup == AgentSetup::blueprint(dc, rt))
                    .map(|r| r.success)
            };
            ensure!(outcome(true) == Some(true), "{task}: dc=on rt={rt} did not succeed");
            ensure!(outcome(false) == Some(false), "{task}: dc=off rt={rt} did not fail");
        }
    }

    let mut table = BTreeMap::new();
    for domain in Domain::BENCHMARKED {
        for rt in [false, true] {
            let on = pass1(&results, AgentSetup::blueprint(true, rt), domain);
            let off = pass1(&results, AgentSetup::blueprint(false, rt), domain);
            ensure!(on >= off, "{} rt={rt}: pass^1 {on:.1} with dc, {off:.1} without", domain.name());
            table.insert((domain.name(), rt), (off, on));
        }
    }
    let fc: Vec<String> = Domain::BENCHMARKED
        .iter()
        .map(|&d| format!("{} {:.1}", d.name(), pass1(&results, AgentSetup::baseline(Variant::Fc), d)))
        .collect();
    let rows: Vec<String> = table
        .iter()
        .map(|((domain, rt), (off, on))| format!("{domain}{} {off:.1}->{on:.1}", if *rt { "+rt" } else { "" }))
        .collect();
    Ok(format!("conflict tasks {} need dc; pass^1 dc off->on: {}; fc {}", conflicts.join(", "), rows.join(", "), fc.join(", ")))
}

//! Benchmark report: a JSON document and a Markdown rendering laid out like
//! the score, case-study and ablation tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domains::Domain;
use crate::metrics::{domain_weighted_average, pass_hat_k, reduction_percent, round1};
use crate::task::Task;
use crate::trial::{RoleCounts, TrialResult};
use crate::variant::AgentSetup;
use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainScore {
    pub domain: Domain,
    pub tasks: usize,
    /// pass^k in percent for k = 1..=trials, averaged over tasks.
    pub pass_hat_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupScores {
    pub label: String,
    pub setup: AgentSetup,
    pub domains: Vec<DomainScore>,
    /// Domain-weighted average of pass^1, in percent.
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub domain: Domain,
    /// Successes per setup label.
    pub successes: BTreeMap<String, u32>,
    /// pass^1 of the first setup minus that of the reference, in points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub label: String,
    pub turns: RoleCounts,
    pub tokens: RoleCounts,
    pub tool_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub task_id: String,
    pub domain: Domain,
    pub rows: Vec<CaseStudyRow>,
    /// Tool-call reduction of the first setup relative to the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub title: String,
    pub trials: u32,
    pub scores: Vec<SetupScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub tasks: Vec<TaskRow>,
    pub case_studies: Vec<CaseStudy>,
}

fn percent(x: f64) -> f64 {
    round1(x * 100.0)
}

/// Build the report for `results` of `setups` over `tasks`. `reference`
/// names the setup the first one is compared against.
pub fn build_report(
    title: &str,
    tasks: &[Task],
    setups: &[AgentSetup],
    reference: Option<AgentSetup>,
    trials: u32,
    results: &[TrialResult],
) -> Result<BenchmarkReport, BenchError> {
    if results.is_empty() {
        return Err(BenchError::Usage("no trial results to report".into()));
    }
    let successes = |setup: &AgentSetup, task: &Task| -> u32 {
        results
            .iter()
            .filter(|r| r.setup == *setup && r.task_id == task.task_id && r.success)
            .count() as u32
    };
    let domains: Vec<Domain> = Domain::BENCHMARKED
        .into_iter()
        .filter(|d| tasks.iter().any(|t| t.domain == *d))
        .collect();

    let mut scores = Vec::new();
    for setup in setups {
        let mut per_domain = Vec::new();
        for &domain in &domains {
            let in_domain: Vec<&Task> = tasks.iter().filter(|t| t.domain == domain).collect();
            let mut pass = Vec::new();
            for k in 1..=trials as u64 {
                let mut sum = 0.0;
                for task in &in_domain {
                    sum += pass_hat_k(trials as u64, successes(setup, task) as u64, k)
                        .map_err(|e| BenchError::Usage(e.to_string()))?;
                }
                pass.push(percent(sum / in_domain.len() as f64));
            }
            per_domain.push(DomainScore { domain, tasks: in_domain.len(), pass_hat_k: pass });
        }
        let pass1: Vec<f64> = per_domain.iter().map(|d| d.pass_hat_k[0]).collect();
        let average = round1(domain_weighted_average(&pass1).map_err(|e| BenchError::Usage(e.to_string()))?);
        scores.push(SetupScores { label: setup.label(), setup: *setup, domains: per_domain, average });
    }

    let first = setups[0];
    let rate = |setup: &AgentSetup, task: &Task| successes(setup, task) as f64 / trials as f64 * 100.0;
    let task_rows = tasks
        .iter()
        .map(|task| TaskRow {
            task_id: task.task_id.clone(),
            domain: task.domain,
            successes: setups.iter().map(|s| (s.label(), successes(s, task))).collect(),
            delta: reference.filter(|r| *r != first).map(|r| round1(rate(&first, task) - rate(&r, task))),
        })
        .collect();

    let mut case_studies = Vec::new();
    for task in tasks.iter().filter(|t| t.is_case_study()) {
        let row = |setup: &AgentSetup| {
            results
                .iter()
                .find(|r| r.setup == *setup && r.task_id == task.task_id && r.trial == 0)
                .map(|r| CaseStudyRow { label: setup.label(), turns: r.turns, tokens: r.tokens, tool_calls: r.tool_calls })
        };
        let mut ordered: Vec<AgentSetup> = reference.into_iter().collect();
        ordered.extend(setups.iter().filter(|s| Some(**s) != reference));
        let rows: Vec<CaseStudyRow> = ordered.iter().filter_map(row).collect();
        let tool_call_reduction = match (reference.and_then(|r| row(&r)), row(&first)) {
            (Some(base), Some(ours)) if reference != Some(first) && base.tool_calls > 0 => {
                Some(round1(reduction_percent(base.tool_calls, ours.tool_calls).expect("baseline > 0")))
            }
            _ => None,
        };
        case_studies.push(CaseStudy { task_id: task.task_id.clone(), domain: task.domain, rows, tool_call_reduction });
    }

    Ok(BenchmarkReport {
        title: title.to_string(),
        trials,
        scores,
        reference: reference.map(|r| r.label()),
        tasks: task_rows,
        case_studies,
    })
}

fn mark(on: bool) -> &'static str {
    if on {
        "✓"
    } else {
        "✗"
    }
}

fn capitalized(domain: Domain) -> String {
    let name = domain.name();
    name[..1].to_uppercase() + &name[1..]
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let domains: Vec<Domain> = self
            .scores
            .first()
            .map(|s| s.domains.iter().map(|d| d.domain).collect())
            .unwrap_or_default();
        let _ = writeln!(md, "# {}\n", self.title);
        let _ = writeln!(md, "Trials per task: {}\n", self.trials);

        let _ = writeln!(md, "## Pass^1 by domain\n");
        let mut header = "| Agent | SC | DC | RT |".to_string();
        let mut rule = "|---|---|---|---|".to_string();
        for d in &domains {
            let _ = write!(header, " {} |", capitalized(*d));
            rule.push_str("---|");
        }
        header.push_str(" Avg |");
        rule.push_str("---|");
        let _ = writeln!(md, "{header}\n{rule}");
        for s in &self.scores {
            let sca = !s.setup.variant.is_baseline();
            let _ = write!(md, "| {} | {} | {} | {} |", s.label, mark(sca), mark(s.setup.dc), mark(s.setup.rt));
            for d in &s.domains {
                let _ = write!(md, " {:.1} |", d.pass_hat_k[0]);
            }
            let _ = writeln!(md, " {:.1} |", s.average);
        }

        let _ = writeln!(md, "\n## pass^k\n");
        let mut header = "| Agent | Domain |".to_string();
        let mut rule = "|---|---|".to_string();
        for k in 1..=self.trials {
            let _ = write!(header, " k={k} |");
            rule.push_str("---|");
        }
        let _ = writeln!(md, "{header}\n{rule}");
        for s in &self.scores {
            for d in &s.domains {
                let _ = write!(md, "| {} | {} |", s.label, d.domain);
                for p in &d.pass_hat_k {
                    let _ = write!(md, " {p:.1} |");
                }
                md.push('\n');
            }
        }

        let _ = writeln!(md, "\n## Tasks\n");
        let labels: Vec<&str> = self.scores.iter().map(|s| s.label.as_str()).collect();
        let with_delta = self.tasks.iter().any(|t| t.delta.is_some());
        let mut header = "| Task |".to_string();
        let mut rule = "|---|".to_string();
        for l in &labels {
            let _ = write!(header, " {l} |");
            rule.push_str("---|");
        }
        if with_delta {
            header.push_str(" Delta |");
            rule.push_str("---|");
        }
        let _ = writeln!(md, "{header}\n{rule}");
        for t in &self.tasks {
            let _ = write!(md, "| {} |", t.task_id);
            for l in &labels {
                let _ = write!(md, " {}/{} |", t.successes.get(*l).copied().unwrap_or(0), self.trials);
            }
            if with_delta {
                let _ = write!(md, " {:+.1} |", t.delta.unwrap_or(0.0));
            }
            md.push('\n');
        }

        if !self.case_studies.is_empty() {
            let _ = writeln!(md, "\n## Trajectory length and tokens\n");
            let _ = writeln!(md, "| Domain | Task | Agent | System Times | System Tokens | User Times | User Tokens | Assistant Times | Assistant Tokens | Tool Times | Tool Tokens |");
            let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|---|---|");
            for c in &self.case_studies {
                for r in &c.rows {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                        capitalized(c.domain),
                        c.task_id,
                        r.label,
                        r.turns.system,
                        r.tokens.system,
                        r.turns.user,
                        r.tokens.user,
                        r.turns.assistant,
                        r.tokens.assistant,
                        r.turns.tool,
                        r.tokens.tool
                    );
                }
            }
            md.push('\n');
            for c in &self.case_studies {
                if let Some(reduction) = c.tool_call_reduction {
                    let counts: Vec<String> = c.rows.iter().map(|r| r.tool_calls.to_string()).collect();
                    let _ = writeln!(md, "- {}: tool calls {}, a {reduction:.1}% reduction.", c.task_id, counts.join(" -> "));
                }
            }
        }
        md
    }

    /// Write `report.json` and `report.md` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        Ok(())
    }
}

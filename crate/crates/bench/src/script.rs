//! Renders a task's scripted model behaviour into mock provider scripts.

use agent_blueprints::workflows::intents::is_gated;
use agent_core::protocol::ToolCall;
use agent_core::providers::{MockScript, ScriptStep, ScriptedResponse, StepMatch, ToggleFilter};

use crate::task::{BaselineStep, PlanTurn, Task};
use crate::variant::Variant;

fn only(dc: bool) -> Option<ToggleFilter> {
    Some(ToggleFilter { dc: Some(dc), rt: None })
}

fn step(content: &str) -> ScriptStep {
    ScriptStep::respond(ScriptedResponse::text(content))
}

fn calling(content: String, name: &str, arguments: &serde_json::Value) -> ScriptedResponse {
    ScriptedResponse {
        content,
        tool_calls: Some(vec![ToolCall {
            name: name.to_string(),
            arguments: arguments.clone(),
        }]),
        finish_reason: None,
    }
}

/// Script for the blueprint assistant, valid for every toggle combination
/// once filtered with [`MockScript::for_toggles`].
///
/// Per user turn the assistant makes an extraction call (matched on the
/// user's line), a validator call if the intent is gated and the gate is
/// on, and a reply call.
pub fn blueprint_script(task: &Task) -> MockScript {
    let mut steps = Vec::new();
    for (turn, line) in task.plan.iter().zip(&task.user_script) {
        let matcher = Some(StepMatch {
            last_user_contains: line.utterance.clone(),
        });
        match turn {
            PlanTurn::Say { say } => steps.push(ScriptStep { matcher, ..step(say) }),
            PlanTurn::Intent {
                intent,
                args,
                verdict,
                reply,
                revise_reply,
            } => {
                steps.push(ScriptStep {
                    matcher,
                    ..ScriptStep::respond(calling(String::new(), intent, args))
                });
                if is_gated(task.domain.name(), intent) {
                    let verdict = verdict.as_deref().unwrap_or("APPROVE");
                    steps.push(ScriptStep { toggles: only(true), ..step(verdict) });
                }
                match revise_reply {
                    Some(revised) => {
                        steps.push(ScriptStep { toggles: only(true), ..step(revised) });
                        steps.push(ScriptStep { toggles: only(false), ..step(reply) });
                    }
                    None => steps.push(step(reply)),
                }
            }
        }
    }
    MockScript { steps }
}

/// Script for a baseline loop. The trajectory is the same for every
/// baseline; the variants differ in what accompanies each action.
pub fn baseline_script(task: &Task, variant: Variant) -> MockScript {
    let steps = task
        .baseline_for(variant.name())
        .iter()
        .map(|s| {
            ScriptStep::respond(match s {
                BaselineStep::Tool { tool, args, thought } => {
                    let content = match (variant, thought) {
                        (Variant::React, Some(t)) => format!("Thought: {t}"),
                        (Variant::Act, _) => format!("Action: {tool}({args})"),
                        _ => String::new(),
                    };
                    calling(content, tool, args)
                }
                BaselineStep::Respond { respond, thought } => ScriptedResponse::text(match (variant, thought) {
                    (Variant::React, Some(t)) => format!("Thought: {t}\n{respond}"),
                    _ => respond.clone(),
                }),
            })
        })
        .collect();
    MockScript { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixtures;
    use crate::domains::Domain;
    use agent_core::config::Toggles;

    fn task(id: &str) -> Task {
        let fx = Fixtures::default();
        fx.all_tasks().unwrap().into_iter().find(|t| t.task_id == id).unwrap()
    }

    #[test]
    fn gate_steps_exist_only_with_dc() {
        let t = task("airline-3");
        assert_eq!(t.domain, Domain::Airline);
        let script = blueprint_script(&t);
        let on = script.for_toggles(&Toggles { dc_enabled: true, consolidated_tools: true });
        let off = script.for_toggles(&Toggles { dc_enabled: false, consolidated_tools: true });
        assert_eq!(on.steps.len(), 3);
        assert!(on.steps[1].response.content.starts_with("REVISE:"));
        assert!(on.steps[2].response.content.contains("non-refundable"));
        assert_eq!(off.steps.len(), 2);
        assert!(off.steps[1].response.content.contains("refunded"));
    }

    #[test]
    fn ungated_intents_have_no_validator_step() {
        let script = blueprint_script(&task("retail-11"));
        assert_eq!(script.steps.len(), 2);
        assert!(script.steps.iter().all(|s| s.toggles.is_none()));
    }

    #[test]
    fn baseline_variants_share_the_trajectory() {
        let t = task("retail-4");
        let fc = baseline_script(&t, Variant::Fc);
        let react = baseline_script(&t, Variant::React);
        let act = baseline_script(&t, Variant::Act);
        assert_eq!(fc.steps.len(), react.steps.len());
        assert_eq!(fc.steps.len(), act.steps.len());
        assert_eq!(fc.steps[0].response.content, "");
        assert!(react.steps[0].response.content.starts_with("Thought: "));
        assert!(act.steps[0].response.content.starts_with("Action: find_user_id_by_email("));
        for ((a, b), c) in fc.steps.iter().zip(&react.steps).zip(&act.steps) {
            assert_eq!(a.response.tool_calls, b.response.tool_calls);
            assert_eq!(a.response.tool_calls, c.response.tool_calls);
        }
    }
}

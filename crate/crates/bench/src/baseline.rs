//! In-process baseline agent loops over the model and tool registry.
//!
//! All three baselines run the same loop: call the model with the tools
//! offered, dispatch any tool calls and feed the results back, and hand a
//! plain reply to the user. They differ in the instruction and in what the
//! model writes alongside each action (see [`crate::script`]).

use agent_core::executor::TelemetryEvent;
use agent_core::protocol::{ChatMessage, ErrorInfo, LlmRequest, Role};
use agent_core::providers::{LlmProvider, ToolRegistry};
use serde_json::{json, Value};

use crate::simulator::{is_stop, UserSimulator};
use crate::variant::Variant;

/// Model steps after which a baseline is stopped.
pub const MAX_AGENT_STEPS: usize = 30;

pub fn instruction(variant: Variant) -> &'static str {
    match variant {
        Variant::React => "Think step by step. Before each action write `Thought:` with your reasoning, then call one function or reply to the user.",
        Variant::Act => "Respond with an action only: call one function or reply to the user, without explaining your reasoning.",
        _ => "Call the functions you need with the right arguments, or reply to the user.",
    }
}

#[derive(Debug, Default)]
pub struct BaselineRun {
    pub events: Vec<TelemetryEvent>,
    /// Set when the loop ended abnormally.
    pub error: Option<ErrorInfo>,
}

impl BaselineRun {
    fn push(&mut self, op: &str, ok: bool, summary: Value) -> &TelemetryEvent {
        let seq = self.events.len() as u64 + 1;
        self.events.push(TelemetryEvent {
            seq,
            op: op.to_string(),
            request_id: seq,
            ok,
            attempts: 1,
            duration_ms: 0,
            summary,
        });
        self.events.last().expect("just pushed")
    }
}

/// Drive one conversation. `observe` sees every event together with the
/// document the agent received for it.
pub fn run_baseline(
    variant: Variant,
    policy: &str,
    first: String,
    llm: &mut dyn LlmProvider,
    tools: &ToolRegistry,
    user: &mut UserSimulator,
    observe: &mut dyn FnMut(&TelemetryEvent, &Value),
) -> BaselineRun {
    let mut run = BaselineRun::default();
    let mut messages = vec![
        ChatMessage::new(Role::System, format!("{policy}\n\n{}", instruction(variant))),
        ChatMessage::new(Role::User, first),
    ];
    let specs = tools.specs();
    let mut steps = 0;
    loop {
        if steps == MAX_AGENT_STEPS {
            run.error = Some(ErrorInfo::fatal(format!("step cap of {MAX_AGENT_STEPS} reached")));
            break;
        }
        steps += 1;
        let mut request = LlmRequest::new("scripted", messages.clone());
        request.tools = Some(specs.clone());
        let response = match llm.invoke(&request) {
            Ok(r) => r,
            Err(error) => {
                let event = run.push("llm.invoke", false, json!({"model": request.model, "error": error}));
                observe(event, &Value::Null);
                run.error = Some(error);
                break;
            }
        };
        let summary = json!({
            "model": request.model,
            "content": response.message.content,
            "tool_calls": response.tool_calls,
            "finish_reason": response.finish_reason,
            "usage": response.usage,
        });
        let event = run.push("llm.invoke", true, summary);
        observe(event, &serde_json::to_value(&response).expect("response serializes"));
        messages.push(ChatMessage::new(Role::Assistant, response.message.content.clone()));

        if !response.tool_calls().is_empty() {
            for call in response.tool_calls() {
                let (ok, doc, summary) = match tools.dispatch(&call.name, &call.arguments) {
                    Ok(doc) => (true, doc.clone(), json!({"name": call.name, "args": call.arguments, "result": doc})),
                    Err(error) => (
                        false,
                        json!({"ok": false, "error": error.message}),
                        json!({"name": call.name, "args": call.arguments, "error": error}),
                    ),
                };
                let event = run.push("tool.call", ok, summary);
                observe(event, &doc);
                messages.push(ChatMessage::new(Role::Tool, doc.to_string()));
            }
            continue;
        }

        let content = response.message.content;
        let event = run.push("user.send", true, json!({"content": content}));
        observe(event, &json!({"delivered": true}));
        let reply = user.respond(&content);
        let event = run.push("user.wait", true, json!({"content": reply}));
        observe(event, &json!({"content": reply}));
        if is_stop(&reply) {
            break;
        }
        messages.push(ChatMessage::new(Role::User, reply));
    }
    let status = if run.error.is_some() { "error" } else { "ok" };
    let event = run.push("finish", run.error.is_none(), json!({"status": status, "output": null}));
    observe(event, &Value::Null);
    run
}

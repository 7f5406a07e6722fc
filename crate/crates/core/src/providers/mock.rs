//! Scripted, deterministic model provider.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{token_estimate, LlmProvider};
use crate::config::Toggles;
use crate::protocol::{
    classify_error, ChatMessage, ErrorInfo, FinishReason, LlmRequest, LlmResponse, RawFailure,
    Role, ToolCall, Usage,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepMatch {
    pub last_user_contains: String,
}

/// Toggle condition restricting a step to agents with matching toggles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToggleFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dc: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt: Option<bool>,
}

impl ToggleFilter {
    pub fn admits(&self, toggles: &Toggles) -> bool {
        self.dc.is_none_or(|dc| dc == toggles.dc_enabled)
            && self.rt.is_none_or(|rt| rt == toggles.consolidated_tools)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedResponse {
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_calls: Option<Vec<ToolCall>>,
    /// Defaults to `tool_call` when tool calls are present, else `stop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
}

impl ScriptedResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ScriptedResponse {
            content: content.into(),
            tool_calls: None,
            finish_reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub matcher: Option<StepMatch>,
    pub response: ScriptedResponse,
    #[serde(default)]
    pub fail_first: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggles: Option<ToggleFilter>,
}

impl ScriptStep {
    pub fn respond(response: ScriptedResponse) -> Self {
        ScriptStep {
            matcher: None,
            response,
            fail_first: 0,
            toggles: None,
        }
    }
}

/// Contents of a `*.mockscript` file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    pub steps: Vec<ScriptStep>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read mock script {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse mock script {}: {e}", path.display()))
    }

    /// Drop steps whose toggle condition does not admit `toggles`.
    pub fn for_toggles(&self, toggles: &Toggles) -> MockScript {
        MockScript {
            steps: self
                .steps
                .iter()
                .filter(|s| s.toggles.is_none_or(|f| f.admits(toggles)))
                .cloned()
                .collect(),
        }
    }
}

/// Consumes script steps strictly in order. A predicate miss is fatal: the
/// provider never skips ahead looking for a matching step.
#[derive(Debug, Clone)]
pub struct MockProvider {
    script: MockScript,
    cursor: usize,
    failures_injected: u32,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider {
            script,
            cursor: 0,
            failures_injected: 0,
        }
    }

    pub fn steps_consumed(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.script.steps.len() - self.cursor
    }
}

impl LlmProvider for MockProvider {
    fn invoke(&mut self, request: &LlmRequest) -> Result<LlmResponse, ErrorInfo> {
        let Some(step) = self.script.steps.get(self.cursor) else {
            return Err(classify_error(&RawFailure::Other {
                source: "mock".into(),
                description: format!("mock_script_exhausted after {} steps", self.cursor),
            }));
        };
        if let Some(matcher) = &step.matcher {
            let last_user = request.last_user_content().unwrap_or_default();
            if !last_user.contains(&matcher.last_user_contains) {
                return Err(classify_error(&RawFailure::Other {
                    source: "mock".into(),
                    description: format!(
                        "mock_script_misaligned: step {} expects last user message containing {:?}",
                        self.cursor, matcher.last_user_contains
                    ),
                }));
            }
        }
        if self.failures_injected < step.fail_first {
            self.failures_injected += 1;
            return Err(classify_error(&RawFailure::ProviderTimeout));
        }
        let scripted = &step.response;
        let tool_calls = scripted.tool_calls.clone().filter(|c| !c.is_empty());
        let finish_reason = scripted.finish_reason.unwrap_or(if tool_calls.is_some() {
            FinishReason::ToolCall
        } else {
            FinishReason::Stop
        });
        let response = LlmResponse {
            message: ChatMessage::new(Role::Assistant, scripted.content.clone()),
            usage: Usage {
                prompt_tokens: prompt_tokens(request),
                completion_tokens: completion_tokens(&scripted.content, tool_calls.as_deref()),
            },
            tool_calls,
            finish_reason,
        };
        self.cursor += 1;
        self.failures_injected = 0;
        Ok(response)
    }
}

/// Estimate over the concatenated message contents.
pub fn prompt_tokens(request: &LlmRequest) -> u64 {
    let joined: String = request.messages.iter().map(|m| m.content.as_str()).collect();
    token_estimate(&joined)
}

pub fn completion_tokens(content: &str, tool_calls: Option<&[ToolCall]>) -> u64 {
    let mut text = content.to_string();
    if let Some(calls) = tool_calls {
        text.push_str(&serde_json::to_string(calls).unwrap_or_default());
    }
    token_estimate(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ErrorClass;
    use serde_json::json;

    fn request(user: &str) -> LlmRequest {
        LlmRequest::new(
            "mock-1",
            vec![
                ChatMessage::new(Role::System, "policy"),
                ChatMessage::new(Role::User, user),
            ],
        )
    }

    fn script(doc: serde_json::Value) -> MockScript {
        serde_json::from_value(doc).unwrap()
    }

    #[test]
    fn matched_step_returns_exact_response() {
        let mut mock = MockProvider::new(script(json!({"steps": [
            {"match": {"last_user_contains": "validate"}, "response": {"content": "APPROVE"}}
        ]})));
        let resp = mock.invoke(&request("please validate this")).unwrap();
        assert_eq!(resp.message.content, "APPROVE");
        assert_eq!(resp.finish_reason, FinishReason::Stop);
        assert_eq!(resp.usage.prompt_tokens, token_estimate("policyplease validate this"));
        assert_eq!(resp.usage.completion_tokens, 2);
    }

    #[test]
    fn predicate_miss_is_fatal_and_does_not_skip() {
        let mut mock = MockProvider::new(script(json!({"steps": [
            {"match": {"last_user_contains": "validate"}, "response": {"content": "APPROVE"}},
            {"response": {"content": "fallback"}}
        ]})));
        let err = mock.invoke(&request("hello")).unwrap_err();
        assert_eq!(err.class, ErrorClass::Fatal);
        assert!(err.message.contains("misaligned"));
        assert_eq!(mock.steps_consumed(), 0);
    }

    #[test]
    fn exhausted_script_is_fatal() {
        let mut mock = MockProvider::new(MockScript::default());
        let err = mock.invoke(&request("x")).unwrap_err();
        assert_eq!(err.class, ErrorClass::Fatal);
        assert!(err.message.contains("mock_script_exhausted"));
    }

    #[test]
    fn fail_first_injects_transient_failures() {
        let mut mock = MockProvider::new(script(json!({"steps": [
            {"response": {"content": "ok"}, "fail_first": 2}
        ]})));
        for _ in 0..2 {
            let err = mock.invoke(&request("x")).unwrap_err();
            assert_eq!(err.class, ErrorClass::Transient);
        }
        assert_eq!(mock.invoke(&request("x")).unwrap().message.content, "ok");
    }

    #[test]
    fn tool_calls_set_finish_reason() {
        let mut mock = MockProvider::new(script(json!({"steps": [
            {"response": {"tool_calls": [{"name": "get_order_details", "arguments": {"order_id": "#W1"}}]}}
        ]})));
        let resp = mock.invoke(&request("x")).unwrap();
        assert_eq!(resp.finish_reason, FinishReason::ToolCall);
        assert!(resp.validate().is_ok());
    }

    #[test]
    fn toggle_filter_drops_steps() {
        let s = script(json!({"steps": [
            {"response": {"content": "extract"}},
            {"response": {"content": "APPROVE"}, "toggles": {"dc": true}},
            {"response": {"content": "fine"}, "toggles": {"rt": false}}
        ]}));
        let on = s.for_toggles(&Toggles::default());
        assert_eq!(on.steps.len(), 2);
        let off = s.for_toggles(&Toggles {
            dc_enabled: false,
            consolidated_tools: false,
        });
        let contents: Vec<_> = off.steps.iter().map(|s| s.response.content.as_str()).collect();
        assert_eq!(contents, ["extract", "fine"]);
    }

    #[test]
    fn same_requests_same_responses() {
        let s = script(json!({"steps": [
            {"response": {"content": "a"}}, {"response": {"content": "b"}, "fail_first": 1}
        ]}));
        let run = |s: &MockScript| {
            let mut mock = MockProvider::new(s.clone());
            (0..3)
                .map(|_| serde_json::to_string(&mock.invoke(&request("q")).ok()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(&s), run(&s));
    }
}

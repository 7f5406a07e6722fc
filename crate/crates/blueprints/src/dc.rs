//! Double-check gate: a validator call that must approve an irreversible
//! action before the workflow executes it.

use agent_core::protocol::{ChatMessage, LlmRequest, Role};
use serde_json::{json, Value};

use crate::client::{CallError, Client};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DcVerdict {
    Approve,
    Revise { reason: String },
}

impl DcVerdict {
    /// Strict parse of the first line: `APPROVE` or `REVISE: <reason>`.
    pub fn parse(text: &str) -> Result<DcVerdict, String> {
        let first = text.lines().next().unwrap_or("").trim();
        if first == "APPROVE" {
            return Ok(DcVerdict::Approve);
        }
        match first.strip_prefix("REVISE:") {
            Some(reason) if !reason.trim().is_empty() => Ok(DcVerdict::Revise {
                reason: reason.trim().to_string(),
            }),
            _ => Err(format!("unparseable validator verdict: {first:?}")),
        }
    }

    pub fn approved(&self) -> bool {
        *self == DcVerdict::Approve
    }
}

pub const VALIDATOR_INSTRUCTION: &str = "You are a policy validator. Check the proposed action against the policy and the context. \
Answer on the first line with exactly APPROVE, or REVISE: <reason> if the action violates the policy.";

/// Render the proposed call canonically (sorted keys, compact).
pub fn render_action(tool: &str, args: &Value) -> String {
    let canonical: Value = serde_json::from_str(&args.to_string()).unwrap_or(Value::Null);
    format!("{tool}({canonical})")
}

#[derive(Debug)]
pub enum DcError {
    Call(CallError),
    /// The validator answered outside the grammar; the action must not run.
    Unparseable(String),
}

/// Ask the validator about `tool(args)`. The verdict (or the parse failure)
/// is logged so it appears in telemetry. Fails closed.
pub fn double_check(
    client: &mut Client,
    tool: &str,
    args: &Value,
    policy_excerpt: &str,
    context: &Value,
) -> Result<DcVerdict, DcError> {
    let prompt = format!(
        "Policy:\n{policy_excerpt}\n\nProposed action:\n{}\n\nContext:\n{context}",
        render_action(tool, args)
    );
    let request = LlmRequest::new(
        "",
        vec![
            ChatMessage::new(Role::System, VALIDATOR_INSTRUCTION),
            ChatMessage::new(Role::User, prompt),
        ],
    );
    let response = client.llm(&request).map_err(DcError::Call)?;
    match DcVerdict::parse(&response.message.content) {
        Ok(verdict) => {
            let (decision, reason) = match &verdict {
                DcVerdict::Approve => ("approve", Value::Null),
                DcVerdict::Revise { reason } => ("revise", json!(reason)),
            };
            client
                .log(json!({"event": "dc.verdict", "tool": tool, "decision": decision, "reason": reason}))
                .map_err(DcError::Call)?;
            Ok(verdict)
        }
        Err(message) => {
            client
                .log(json!({"event": "dc.verdict", "tool": tool, "decision": "unparseable", "reason": message}))
                .map_err(DcError::Call)?;
            Err(DcError::Unparseable(message))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_grammar() {
        assert_eq!(DcVerdict::parse("APPROVE").unwrap(), DcVerdict::Approve);
        assert_eq!(DcVerdict::parse("APPROVE\nlooks fine").unwrap(), DcVerdict::Approve);
        assert_eq!(
            DcVerdict::parse("REVISE: fare rule forbids refund").unwrap(),
            DcVerdict::Revise {
                reason: "fare rule forbids refund".into()
            }
        );
        for bad in ["", "approve", "Sure, go ahead", "REVISE:", "REVISE:   ", "I APPROVE"] {
            assert!(DcVerdict::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn action_rendering_is_canonical() {
        let a = render_action("cancel_reservation", &json!({"b": 1, "a": "x"}));
        assert_eq!(a, r#"cancel_reservation({"a":"x","b":1})"#);
    }
}

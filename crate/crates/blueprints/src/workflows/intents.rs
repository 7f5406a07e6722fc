//! Intent functions offered to the model at the extraction node. The model
//! only fills in arguments; the procedure behind each intent is code.

use agent_core::protocol::ToolSpec;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct Intent {
    pub name: &'static str,
    pub description: &'static str,
    pub parameters: Value,
    /// Executes an irreversible action behind the double-check gate.
    pub gated: bool,
}

impl Intent {
    pub fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: self.name.to_string(),
            description: self.description.to_string(),
            parameters: self.parameters.clone(),
        }
    }
}

fn object(properties: Value, required: &[&str]) -> Value {
    json!({"type": "object", "properties": properties, "required": required})
}

fn string_list() -> Value {
    json!({"type": "array", "items": {"type": "string"}})
}

pub fn retail_intents() -> Vec<Intent> {
    vec![
        Intent {
            name: "order_status",
            description: "Report the status of one order.",
            parameters: object(
                json!({"email": {"type": "string"}, "order_id": {"type": "string"}}),
                &["email", "order_id"],
            ),
            gated: false,
        },
        Intent {
            name: "cancel_order",
            description: "Cancel a pending order.",
            parameters: object(
                json!({
                    "email": {"type": "string"},
                    "order_id": {"type": "string"},
                    "reason": {"type": "string", "enum": ["no longer needed", "ordered by mistake"]}
                }),
                &["email", "order_id", "reason"],
            ),
            gated: true,
        },
        Intent {
            name: "modify_address",
            description: "Change the shipping address of a pending order.",
            parameters: object(
                json!({
                    "email": {"type": "string"},
                    "order_id": {"type": "string"},
                    "address": {
                        "type": "object",
                        "properties": {
                            "address1": {"type": "string"},
                            "city": {"type": "string"},
                            "zip": {"type": "string"}
                        },
                        "required": ["address1", "city", "zip"]
                    }
                }),
                &["email", "order_id", "address"],
            ),
            gated: true,
        },
        Intent {
            name: "exchange_items",
            description: "Exchange delivered items for other variants of the same products.",
            parameters: object(
                json!({
                    "email": {"type": "string"},
                    "order_id": {"type": "string"},
                    "item_ids": string_list(),
                    "new_item_ids": string_list(),
                    "payment_method_id": {"type": "string"}
                }),
                &["email", "order_id", "item_ids", "new_item_ids", "payment_method_id"],
            ),
            gated: true,
        },
        Intent {
            name: "return_items",
            description: "Return delivered items for a refund.",
            parameters: object(
                json!({
                    "email": {"type": "string"},
                    "order_id": {"type": "string"},
                    "item_ids": string_list(),
                    "payment_method_id": {"type": "string"}
                }),
                &["email", "order_id", "item_ids", "payment_method_id"],
            ),
            gated: true,
        },
        policy_question(),
    ]
}

pub fn airline_intents() -> Vec<Intent> {
    let base = |extra: Value, required: &[&str]| {
        let mut props = json!({"user_id": {"type": "string"}, "reservation_id": {"type": "string"}});
        for (k, v) in extra.as_object().expect("object") {
            props[k] = v.clone();
        }
        let mut all = vec!["user_id", "reservation_id"];
        all.extend_from_slice(required);
        object(props, &all)
    };
    vec![
        Intent {
            name: "reservation_info",
            description: "Report the details of a reservation.",
            parameters: base(json!({}), &[]),
            gated: false,
        },
        Intent {
            name: "cancel_booking",
            description: "Cancel a reservation and refund it.",
            parameters: base(json!({"reason": {"type": "string"}}), &["reason"]),
            gated: true,
        },
        Intent {
            name: "change_flight",
            description: "Move a reservation to another flight on the same route.",
            parameters: base(
                json!({
                    "origin": {"type": "string"},
                    "destination": {"type": "string"},
                    "date": {"type": "string"},
                    "flight_number": {"type": "string"},
                    "payment_method_id": {"type": "string"}
                }),
                &["origin", "destination", "date", "flight_number", "payment_method_id"],
            ),
            gated: true,
        },
        Intent {
            name: "change_cabin",
            description: "Change the cabin class of a reservation.",
            parameters: base(
                json!({
                    "cabin": {"type": "string", "enum": ["economy", "business"]},
                    "payment_method_id": {"type": "string"}
                }),
                &["cabin", "payment_method_id"],
            ),
            gated: true,
        },
        Intent {
            name: "add_baggage",
            description: "Set the number of checked bags on a reservation.",
            parameters: base(
                json!({
                    "total_baggages": {"type": "integer"},
                    "payment_method_id": {"type": "string"}
                }),
                &["total_baggages", "payment_method_id"],
            ),
            gated: true,
        },
        policy_question(),
    ]
}

fn policy_question() -> Intent {
    Intent {
        name: "policy_question",
        description: "Answer a general question about store or airline policy.",
        parameters: object(json!({"question": {"type": "string"}}), &["question"]),
        gated: false,
    }
}

pub fn intents_for(domain: &str) -> Vec<Intent> {
    match domain {
        "retail" => retail_intents(),
        "airline" => airline_intents(),
        _ => Vec::new(),
    }
}

pub fn is_gated(domain: &str, intent: &str) -> bool {
    intents_for(domain).iter().any(|i| i.name == intent && i.gated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_are_valid_and_unique() {
        for domain in ["retail", "airline"] {
            let intents = intents_for(domain);
            let mut names: Vec<_> = intents.iter().map(|i| i.name).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), intents.len());
            for intent in intents {
                intent.spec().validate().unwrap();
            }
        }
        assert!(is_gated("airline", "cancel_booking"));
        assert!(!is_gated("retail", "order_status"));
    }
}

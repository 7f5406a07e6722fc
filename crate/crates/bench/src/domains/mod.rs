//! Mini retail, airline and ops domains. State is a JSON document whose
//! entity sets are maps keyed by id; it changes only through the tools.

pub mod airline;
pub mod ops;
pub mod retail;

use std::sync::{Arc, Mutex};

use agent_core::protocol::ToolSpec;
use agent_core::providers::{ToolBackend, ToolBinding, ToolRegistry};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Retail,
    Airline,
    Ops,
}

impl Domain {
    pub const BENCHMARKED: [Domain; 2] = [Domain::Retail, Domain::Airline];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Retail => "retail",
            Domain::Airline => "airline",
            Domain::Ops => "ops",
        }
    }

    pub fn parse(name: &str) -> Option<Domain> {
        match name {
            "retail" => Some(Domain::Retail),
            "airline" => Some(Domain::Airline),
            "ops" => Some(Domain::Ops),
            _ => None,
        }
    }

    /// Tools available to an agent. `consolidated` adds the high-level
    /// tools that replace a sequence of fine-grained calls.
    pub fn tool_specs(self, consolidated: bool) -> Vec<ToolSpec> {
        match self {
            Domain::Retail => retail::tool_specs(consolidated),
            Domain::Airline => airline::tool_specs(),
            Domain::Ops => ops::tool_specs(),
        }
    }

    fn call(self, state: &mut Value, function: &str, args: &Value) -> Result<Value, String> {
        match self {
            Domain::Retail => retail::call(state, function, args),
            Domain::Airline => airline::call(state, function, args),
            Domain::Ops => ops::call(state, function, args),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Live state of one trial, shared with the tool registry.
#[derive(Debug, Clone)]
pub struct DomainBackend {
    domain: Domain,
    state: Arc<Mutex<Value>>,
}

impl DomainBackend {
    pub fn new(domain: Domain, initial: Value) -> Self {
        DomainBackend {
            domain,
            state: Arc::new(Mutex::new(initial)),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn snapshot(&self) -> Value {
        self.state.lock().expect("state lock").clone()
    }

    pub fn hash(&self) -> String {
        state_hash(&self.state.lock().expect("state lock"))
    }

    pub fn registry(&self, consolidated: bool) -> ToolRegistry {
        let mut registry = ToolRegistry::default();
        let backend: Arc<dyn ToolBackend> = Arc::new(self.clone());
        for spec in self.domain.tool_specs(consolidated) {
            let function = spec.name.clone();
            registry
                .register(
                    spec,
                    ToolBinding::Builtin {
                        backend: backend.clone(),
                        function,
                    },
                )
                .expect("domain tool specs are valid and unique");
        }
        registry
    }
}

impl ToolBackend for DomainBackend {
    fn call(&self, function: &str, args: &Value) -> Result<Value, String> {
        let mut state = self.state.lock().expect("state lock");
        // Tools fail atomically: a refused call leaves the state untouched.
        let mut draft = state.clone();
        let value = self.domain.call(&mut draft, function, args)?;
        *state = draft;
        Ok(value)
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(value: &Value) -> String {
    fn write(value: &Value, out: &mut String) {
        match value {
            Value::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, key) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Value::String(key.clone()).to_string());
                    out.push(':');
                    write(&map[key], out);
                }
                out.push('}');
            }
            Value::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(item, out);
                }
                out.push(']');
            }
            scalar => out.push_str(&scalar.to_string()),
        }
    }
    let mut out = String::new();
    write(value, &mut out);
    out
}

/// SHA-256 over the canonical rendering. Entity sets are keyed maps, so the
/// hash does not depend on insertion order.
pub fn state_hash(state: &Value) -> String {
    hex::encode(Sha256::digest(canonical_json(state).as_bytes()))
}

pub(crate) fn spec(name: &str, description: &str, properties: Value, required: &[&str]) -> ToolSpec {
    ToolSpec {
        name: name.to_string(),
        description: description.to_string(),
        parameters: json!({
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false
        }),
    }
}

pub(crate) fn str_arg<'a>(args: &'a Value, key: &str) -> Result<&'a str, String> {
    args[key].as_str().ok_or_else(|| format!("missing string argument `{key}`"))
}

pub(crate) fn int_arg(args: &Value, key: &str) -> Result<i64, String> {
    args[key].as_i64().ok_or_else(|| format!("missing integer argument `{key}`"))
}

pub(crate) fn str_list(args: &Value, key: &str) -> Result<Vec<String>, String> {
    args[key]
        .as_array()
        .ok_or_else(|| format!("missing list argument `{key}`"))?
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("`{key}` must hold strings")))
        .collect()
}

pub(crate) fn entity<'a>(state: &'a Value, set: &str, id: &str, what: &str) -> Result<&'a Value, String> {
    state[set].get(id).ok_or_else(|| format!("{what} {id} not found"))
}

pub(crate) fn entity_mut<'a>(state: &'a mut Value, set: &str, id: &str, what: &str) -> Result<&'a mut Value, String> {
    state[set]
        .get_mut(id)
        .ok_or_else(|| format!("{what} {id} not found"))
}

/// Apply a payment to a method of `user`: gift cards move their balance by
/// `-amount_cents` (a negative amount credits the card).
pub(crate) fn charge(state: &mut Value, user_id: &str, payment_method_id: &str, amount_cents: i64) -> Result<(), String> {
    let user = entity_mut(state, "users", user_id, "user")?;
    let method = user["payment_methods"]
        .get_mut(payment_method_id)
        .ok_or_else(|| format!("payment method {payment_method_id} does not belong to user {user_id}"))?;
    if method["kind"] == "gift_card" {
        let balance = method["balance_cents"].as_i64().unwrap_or(0);
        if balance - amount_cents < 0 {
            return Err(format!("insufficient gift card balance on {payment_method_id}"));
        }
        method["balance_cents"] = json!(balance - amount_cents);
    }
    Ok(())
}

pub(crate) fn push_payment(record: &mut Value, kind: &str, payment_method_id: &str, amount_cents: i64) {
    if let Some(history) = record["payment_history"].as_array_mut() {
        history.push(json!({"kind": kind, "payment_method_id": payment_method_id, "amount_cents": amount_cents}));
    }
}

//! Argument validation against the subset of JSON Schema used by tool specs:
//! `type`, `properties`, `required`, `additionalProperties: false`, `items`
//! and `enum`.

use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    /// Dotted path to the offending value; empty for the root.
    pub path: String,
    pub reason: String,
}

pub fn validate_args(schema: &Value, args: &Value) -> Result<(), SchemaViolation> {
    check(schema, args, &mut String::new())
}

fn check(schema: &Value, value: &Value, path: &mut String) -> Result<(), SchemaViolation> {
    let fail = |path: &str, reason: String| SchemaViolation {
        path: path.to_string(),
        reason,
    };

    if let Some(expected) = schema.get("type").and_then(Value::as_str) {
        if !type_matches(expected, value) {
            return Err(fail(
                path,
                format!("expected {expected}, got {}", type_name(value)),
            ));
        }
    }

    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(fail(path, format!("value {value} not in enum")));
        }
    }

    if let Some(object) = value.as_object() {
        check_object(schema, object, path)?;
    }

    if let (Some(items), Some(array)) = (schema.get("items"), value.as_array()) {
        for (index, item) in array.iter().enumerate() {
            let len = path.len();
            path.push_str(&format!("[{index}]"));
            check(items, item, path)?;
            path.truncate(len);
        }
    }
    Ok(())
}

fn check_object(
    schema: &Value,
    object: &Map<String, Value>,
    path: &mut String,
) -> Result<(), SchemaViolation> {
    let properties = schema.get("properties").and_then(Value::as_object);

    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for name in required.iter().filter_map(Value::as_str) {
            if !object.contains_key(name) {
                return Err(SchemaViolation {
                    path: join(path, name),
                    reason: "required field missing".into(),
                });
            }
        }
    }

    let closed = schema.get("additionalProperties") == Some(&Value::Bool(false));
    for (key, child) in object {
        match properties.and_then(|p| p.get(key)) {
            Some(child_schema) => {
                let len = path.len();
                if !path.is_empty() {
                    path.push('.');
                }
                path.push_str(key);
                check(child_schema, child, path)?;
                path.truncate(len);
            }
            None if closed => {
                return Err(SchemaViolation {
                    path: join(path, key),
                    reason: "unexpected field".into(),
                })
            }
            None => {}
        }
    }
    Ok(())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn type_matches(expected: &str, value: &Value) -> bool {
    match expected {
        "string" => value.is_string(),
        "integer" => value.is_i64() || value.is_u64(),
        "number" => value.is_number(),
        "boolean" => value.is_boolean(),
        "object" => value.is_object(),
        "array" => value.is_array(),
        "null" => value.is_null(),
        _ => false,
    }
}

fn type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_f64() => "number",
        Value::Number(_) => "integer",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn order_schema() -> Value {
        json!({
            "type": "object",
            "properties": {
                "order_id": {"type": "string"},
                "item_ids": {"type": "array", "items": {"type": "string"}},
                "address": {
                    "type": "object",
                    "properties": {"zip": {"type": "string"}},
                    "required": ["zip"]
                },
                "mode": {"type": "string", "enum": ["fast", "slow"]}
            },
            "required": ["order_id"],
            "additionalProperties": false
        })
    }

    #[test]
    fn accepts_valid_arguments() {
        let args = json!({"order_id": "#W1", "item_ids": ["a", "b"], "address": {"zip": "1"}});
        assert!(validate_args(&order_schema(), &args).is_ok());
    }

    #[test]
    fn names_missing_required_field() {
        let err = validate_args(&order_schema(), &json!({})).unwrap_err();
        assert_eq!(err.path, "order_id");
    }

    #[test]
    fn paths_into_nested_values() {
        let err = validate_args(
            &order_schema(),
            &json!({"order_id": "#W1", "item_ids": ["a", 7]}),
        )
        .unwrap_err();
        assert_eq!(err.path, "item_ids[1]");

        let err = validate_args(&order_schema(), &json!({"order_id": "#W1", "address": {}}))
            .unwrap_err();
        assert_eq!(err.path, "address.zip");
    }

    #[test]
    fn rejects_unexpected_fields_and_enum_misses() {
        let err = validate_args(&order_schema(), &json!({"order_id": "x", "extra": 1})).unwrap_err();
        assert_eq!(err.path, "extra");
        let err =
            validate_args(&order_schema(), &json!({"order_id": "x", "mode": "warp"})).unwrap_err();
        assert_eq!(err.path, "mode");
    }

    #[test]
    fn integer_is_not_float() {
        let schema = json!({"type": "integer"});
        assert!(validate_args(&schema, &json!(3)).is_ok());
        assert!(validate_args(&schema, &json!(3.5)).is_err());
    }
}
